"""Evidential map belief: Beta occupancy voxels and Dirichlet semantic cells.

Every voxel carries Beta pseudo-counts ``(alpha, beta)`` for occupied/free
evidence; every footprint cell carries a vector of Dirichlet class
evidences ``lambda_n``.  Updates are exact conjugate additions, so the
belief stays in closed form and uncertainties are cheap to read off.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FREE_CLASS = 0
PRIOR_VARIANCE = 1.0 / 12.0  # Var[Beta(1, 1)]


class ContractError(ValueError):
    """Raised when a call violates an operation's precondition."""


@dataclass(frozen=True)
class GridSpec:
    """Voxel grid geometry shared by belief, ground truth and sensor.

    Rows (``H``) run along shelf depth starting at the open front, columns
    (``W``) along shelf width, layers (``D``) upward from the shelf board.
    """

    H: int = 82
    W: int = 157
    D: int = 66
    resolution: float = 0.005
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.H, self.W, self.D)

    @property
    def width_m(self) -> float:
        return self.W * self.resolution

    @property
    def depth_m(self) -> float:
        return self.H * self.resolution

    @property
    def height_m(self) -> float:
        return self.D * self.resolution

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World x (H, W) and y (H, W) of footprint cell centres."""
        ox, oy, _ = self.origin
        xs = ox + (np.arange(self.W) + 0.5) * self.resolution
        ys = oy + (np.arange(self.H) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys)
        return gx, gy

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        ox, oy, _ = self.origin
        return int(np.floor((y - oy) / self.resolution)), int(np.floor((x - ox) / self.resolution))

    def cell_to_world(self, i: float, j: float) -> tuple[float, float]:
        ox, oy, _ = self.origin
        return ox + (j + 0.5) * self.resolution, oy + (i + 0.5) * self.resolution


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ContractError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class DirichletParams:
    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if len(lam) < 2:
            raise ContractError("Dirichlet needs at least two classes")
        if any(not (x > 0) for x in lam):
            raise ContractError(f"Dirichlet evidence must be positive, got {lam}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def n_classes(self) -> int:
        return len(self.lambdas)


def beta_mean(p: BetaParams) -> float:
    return p.alpha / (p.alpha + p.beta)


def beta_variance(p: BetaParams) -> float:
    s = p.alpha + p.beta
    return p.alpha * p.beta / (s * s * (s + 1.0))


def dirichlet_expectation(p: DirichletParams) -> np.ndarray:
    lam = np.asarray(p.lambdas, dtype=float)
    return lam / lam.sum()


def dirichlet_uncertainty(p: DirichletParams) -> float:
    return len(p.lambdas) / float(np.sum(p.lambdas))


def hard_label(p: DirichletParams) -> int:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return int(np.argmax(np.asarray(p.lambdas)))


def fuse_occupancy(cell: BetaParams, evidence: str, weight: float = 1.0) -> BetaParams:
    if not weight > 0:
        raise ContractError(f"fusion weight must be positive, got {weight}")
    if evidence == "hit":
        return BetaParams(cell.alpha + weight, cell.beta)
    if evidence == "miss":
        return BetaParams(cell.alpha, cell.beta + weight)
    raise ContractError(f"evidence must be 'hit' or 'miss', got {evidence!r}")


def fuse_semantic(cell: DirichletParams, cls: int, weight: float = 1.0) -> DirichletParams:
    if not weight > 0:
        raise ContractError(f"fusion weight must be positive, got {weight}")
    if not 0 <= cls < cell.n_classes:
        raise ContractError(f"class {cls} out of range for {cell.n_classes} classes")
    lam = list(cell.lambdas)
    lam[cls] += weight
    return DirichletParams(tuple(lam))


# -- array forms ------------------------------------------------------------


def beta_mean_array(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return alpha / (alpha + beta)


def beta_variance_array(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    s = alpha + beta
    return alpha * beta / (s * s * (s + 1.0))


@dataclass
class UncertaintyMaps:
    u_o: np.ndarray  # (H, W, D) voxel variance
    u_s: np.ndarray  # (H, W) N / S

    @property
    def u_o_2d(self) -> np.ndarray:
        """Column-maximum variance: the worst ignorance over each footprint cell."""
        return self.u_o.max(axis=2)


@dataclass
class BeliefState:
    alpha: np.ndarray
    beta: np.ndarray
    lam: np.ndarray
    grid: GridSpec = field(default_factory=GridSpec)

    @classmethod
    def prior(cls, grid: GridSpec | None = None, n_classes: int = 12) -> "BeliefState":
        grid = grid or GridSpec()
        if n_classes < 2:
            raise ContractError("n_classes must be >= 2")
        return cls(
            alpha=np.ones(grid.shape),
            beta=np.ones(grid.shape),
            lam=np.ones((grid.H, grid.W, n_classes)),
            grid=grid,
        )

    def __post_init__(self):
        if self.alpha.shape != self.grid.shape or self.beta.shape != self.grid.shape:
            raise ContractError(f"occupancy arrays must have shape {self.grid.shape}")
        if self.lam.shape[:2] != (self.grid.H, self.grid.W):
            raise ContractError("semantic grid footprint must match occupancy footprint")

    @property
    def n_classes(self) -> int:
        return self.lam.shape[2]

    @property
    def resolution(self) -> float:
        return self.grid.resolution

    def copy(self) -> "BeliefState":
        return BeliefState(self.alpha.copy(), self.beta.copy(), self.lam.copy(), self.grid)

    def same_grid(self, other: "BeliefState") -> bool:
        return self.grid == other.grid and self.lam.shape == other.lam.shape

    def occupancy_mean(self) -> np.ndarray:
        return beta_mean_array(self.alpha, self.beta)

    def occupancy_variance(self) -> np.ndarray:
        return beta_variance_array(self.alpha, self.beta)

    def semantic_uncertainty(self) -> np.ndarray:
        return self.n_classes / self.lam.sum(axis=2)

    def semantic_expectation(self) -> np.ndarray:
        return self.lam / self.lam.sum(axis=2, keepdims=True)

    def hard_labels(self) -> np.ndarray:
        return np.argmax(self.lam, axis=2)

    def occupancy_probability_2d(self) -> np.ndarray:
        """Column-maximum expected occupancy."""
        return self.occupancy_mean().max(axis=2)

    def __eq__(self, other):
        if not isinstance(other, BeliefState):
            return NotImplemented
        return (
            self.same_grid(other)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.lam, other.lam)
        )


def uncertainty_maps(b: BeliefState) -> UncertaintyMaps:
    return UncertaintyMaps(u_o=b.occupancy_variance(), u_s=b.semantic_uncertainty())


def project_height_map(b: BeliefState, theta_occ: float = 0.87) -> np.ndarray:
    """Height (m) of the topmost voxel per column whose mean occupancy reaches ``theta_occ``."""
    if not 0.0 < theta_occ < 1.0:
        raise ContractError(f"theta_occ must lie in (0, 1), got {theta_occ}")
    occ = b.occupancy_mean() >= theta_occ
    D = b.grid.D
    # index of topmost occupied voxel; columns without any stay at 0
    top = D - np.argmax(occ[:, :, ::-1], axis=2)
    return np.where(occ.any(axis=2), top * b.resolution, 0.0)


# -- serialisation ----------------------------------------------------------

_MAGIC = b"SMBL"
_HEADER = struct.Struct("<4sIIIIId3d")


def save_belief(b: BeliefState, path: str | Path) -> None:
    """Binary snapshot: fixed header then row-major float64 alpha, beta, lambdas."""
    g = b.grid
    header = _HEADER.pack(_MAGIC, 1, g.H, g.W, g.D, b.n_classes, g.resolution, *g.origin)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (b.alpha, b.beta, b.lam):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_belief(path: str | Path) -> BeliefState:
    raw = Path(path).read_bytes()
    magic, version, H, W, D, n, res, ox, oy, oz = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a belief snapshot (magic={magic!r}, version={version})")
    grid = GridSpec(H, W, D, res, (ox, oy, oz))
    off = _HEADER.size
    body = np.frombuffer(raw, dtype="<f8", offset=off)
    nv = H * W * D
    alpha = body[:nv].reshape(H, W, D).copy()
    beta = body[nv : 2 * nv].reshape(H, W, D).copy()
    lam = body[2 * nv : 2 * nv + H * W * n].reshape(H, W, n).copy()
    return BeliefState(alpha, beta, lam, grid)


def belief_to_json(b: BeliefState) -> str:
    g = b.grid
    doc = {
        "H": g.H,
        "W": g.W,
        "D": g.D,
        "resolution": g.resolution,
        "origin": list(g.origin),
        "n_classes": b.n_classes,
        "alpha": b.alpha.ravel().tolist(),
        "beta": b.beta.ravel().tolist(),
        "lambdas": b.lam.ravel().tolist(),
    }
    return json.dumps(doc, separators=(",", ":"))


def belief_from_json(text: str) -> BeliefState:
    doc = json.loads(text)
    grid = GridSpec(doc["H"], doc["W"], doc["D"], doc["resolution"], tuple(doc["origin"]))
    alpha = np.asarray(doc["alpha"], dtype=float).reshape(grid.shape)
    beta = np.asarray(doc["beta"], dtype=float).reshape(grid.shape)
    lam = np.asarray(doc["lambdas"], dtype=float).reshape(grid.H, grid.W, doc["n_classes"])
    return BeliefState(alpha, beta, lam, grid)
