"""Simulated depth + semantic camera and conjugate fusion into the belief."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _raycast
from .actions import ViewPose
from .belief import FREE_CLASS, BeliefState, GridSpec
from .scene import Scene, ground_truth_maps


@dataclass(frozen=True)
class CameraModel:
    hfov: float = np.deg2rad(70.0)
    vfov: float = np.deg2rad(55.0)
    nx: int = 64
    ny: int = 48
    max_range: float = 1.5

    def __post_init__(self):
        if not (0 < self.hfov < np.pi and 0 < self.vfov < np.pi):
            raise ValueError("field of view must lie in (0, pi)")
        if self.nx < 8 or self.ny < 8:
            raise ValueError("camera needs at least 8x8 rays")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


@dataclass
class Observation:
    """Per-ray results; traversed voxels are stored CSR-style.

    Ray ``r`` visited ``flat[offsets[r]:offsets[r + 1]]`` in order; when
    ``hit[r]`` the last of those is the hit voxel.
    """

    offsets: np.ndarray
    flat: np.ndarray
    hit: np.ndarray
    distance: np.ndarray  # metres
    cls: np.ndarray  # -1 where no hit
    grid: GridSpec

    @property
    def n_rays(self) -> int:
        return len(self.hit)

    def ray_voxels(self, r: int) -> np.ndarray:
        return self.flat[self.offsets[r] : self.offsets[r + 1]]

    def free_voxels(self, r: int) -> np.ndarray:
        v = self.ray_voxels(r)
        return v[:-1] if self.hit[r] else v

    def visited(self) -> np.ndarray:
        return np.unique(self.flat)

    @classmethod
    def empty(cls, n_rays: int, grid: GridSpec, max_range: float) -> "Observation":
        return cls(
            np.zeros(n_rays + 1, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.zeros(n_rays, dtype=bool),
            np.full(n_rays, max_range),
            np.full(n_rays, -1, dtype=np.int64),
            grid,
        )


def camera_frame(pose: ViewPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f = pose.direction
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(f, up)
    if np.linalg.norm(right) < 1e-9:  # looking straight up/down
        right = np.array([1.0, 0.0, 0.0])
    right /= np.linalg.norm(right)
    true_up = np.cross(right, f)
    return f, right, true_up


def ray_directions(pose: ViewPose, cam: CameraModel) -> np.ndarray:
    """Unit world-frame ray directions, shape (ny * nx, 3)."""
    f, right, up = camera_frame(pose)
    u = (np.arange(cam.nx) + 0.5) / cam.nx * 2.0 - 1.0
    v = (np.arange(cam.ny) + 0.5) / cam.ny * 2.0 - 1.0
    uu, vv = np.meshgrid(u * np.tan(cam.hfov / 2), v * np.tan(cam.vfov / 2))
    d = f[None, :] + uu.ravel()[:, None] * right[None, :] + vv.ravel()[:, None] * up[None, :]
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def ray_directions_many(poses, cam: CameraModel) -> np.ndarray:
    """Stacked ``ray_directions`` for several poses, shape (V, ny * nx, 3)."""
    cam_pts = np.array([p.cam for p in poses])
    f = np.array([p.target for p in poses]) - cam_pts
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    right = np.cross(f, [0.0, 0.0, 1.0])
    n = np.linalg.norm(right, axis=1)
    right[n < 1e-9] = (1.0, 0.0, 0.0)
    right /= np.linalg.norm(right, axis=1, keepdims=True)
    up = np.cross(right, f)
    u = (np.arange(cam.nx) + 0.5) / cam.nx * 2.0 - 1.0
    v = (np.arange(cam.ny) + 0.5) / cam.ny * 2.0 - 1.0
    uu, vv = np.meshgrid(u * np.tan(cam.hfov / 2), v * np.tan(cam.vfov / 2))
    d = f[:, None, :] + uu.ravel()[None, :, None] * right[:, None, :] + vv.ravel()[None, :, None] * up[:, None, :]
    return d / np.linalg.norm(d, axis=2, keepdims=True)


def _grid_origin(point, grid: GridSpec) -> np.ndarray:
    p = (np.asarray(point, dtype=float) - np.asarray(grid.origin)) / grid.resolution
    return p


def _grid_dirs(dirs: np.ndarray) -> np.ndarray:
    # world (x, y, z) maps onto grid (x=col, y=row, z=layer) directly; voxels are cubes
    return np.ascontiguousarray(dirs)


def render_view(scene: Scene, pose: ViewPose, cam: CameraModel, grid: GridSpec, gt=None, noise: float = 0.0, rng=None) -> Observation:
    """March every camera ray through the ground-truth voxels (DDA).

    ``gt`` may carry precomputed ``ground_truth_maps`` output.  With
    ``noise > 0`` each hit's class is flipped to a random class with that
    probability.
    """
    occ, sem = gt if gt is not None else ground_truth_maps(scene, grid)
    origin = _grid_origin(pose.cam, grid)
    dirs = _grid_dirs(ray_directions(pose, cam))
    t_range = cam.max_range / grid.resolution
    offsets, flat, hit, dist, cls = _raycast.render_rays(origin, dirs, t_range, occ, sem)
    dist = dist * grid.resolution
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        n_cls = int(sem.max()) + 1
        flip = hit & (rng.random(len(hit)) < noise)
        cls = cls.copy()
        cls[flip] = rng.integers(1, max(n_cls, 2), size=int(flip.sum()))
    return Observation(offsets, flat, hit, dist, cls, grid)


def integrate_observation(b: BeliefState, obs: Observation, weight: float = 1.0, extrude: bool = True, inplace: bool = False, semantic_weight: float | None = None, occ_cap: float | None = None, sem_cap: float | None = None) -> BeliefState:
    """Conjugate fusion: misses add ``beta``, hits add ``alpha`` and class evidence.

    With ``extrude`` the hit evidence also covers the voxels below the hit in
    its column, since every object stands on the shelf board.
    ``semantic_weight`` defaults to ``weight``.  ``occ_cap`` / ``sem_cap``
    clamp the total concentration (alpha + beta, sum of lambda) by rescaling,
    which keeps the mean but lets later observations overturn stale evidence
    once the scene has changed.
    """
    ws = weight if semantic_weight is None else semantic_weight
    if weight <= 0 or ws <= 0:
        raise ValueError("weight must be positive")
    if obs.grid != b.grid:
        raise ValueError("observation was rendered on a different grid")
    out = b if inplace else b.copy()
    if obs.n_rays:
        _raycast.fuse_rays(out.alpha, out.beta, out.lam, obs.offsets, obs.flat, obs.hit, obs.cls, float(weight), float(ws), FREE_CLASS, extrude)
    if occ_cap is not None:
        clamp_concentration(out.alpha, out.beta, occ_cap)
    if sem_cap is not None:
        s = out.lam.sum(axis=2, keepdims=True)
        over = s[..., 0] > sem_cap
        if over.any():
            out.lam[over] *= sem_cap / s[over]
    return out


def clamp_concentration(alpha: np.ndarray, beta: np.ndarray, cap: float) -> None:
    s = alpha + beta
    over = s > cap
    if over.any():
        f = cap / s[over]
        alpha[over] *= f
        beta[over] *= f


def blocking_mask(b: BeliefState, theta_occ: float) -> np.ndarray:
    return b.occupancy_mean() >= theta_occ


def visible_voxel_set(source, pose: ViewPose, cam: CameraModel, grid: GridSpec | None = None, theta_occ: float = 0.87) -> np.ndarray:
    """Flat indices of voxels a render from ``pose`` would traverse or hit.

    ``source`` is a ``BeliefState`` (voxels with mean >= ``theta_occ`` block),
    a ``Scene`` (ground truth blocks), or a boolean blocking grid.
    """
    if isinstance(source, BeliefState):
        grid = source.grid
        blocked = blocking_mask(source, theta_occ)
    elif isinstance(source, Scene):
        if grid is None:
            raise ValueError("a grid spec is required for scene visibility")
        blocked = ground_truth_maps(source, grid)[0]
    else:
        if grid is None:
            raise ValueError("a grid spec is required with a raw blocking grid")
        blocked = np.asarray(source, dtype=bool)
    origin = _grid_origin(pose.cam, grid)
    dirs = _grid_dirs(ray_directions(pose, cam))
    return _raycast.visible_set(origin, dirs, cam.max_range / grid.resolution, blocked)


def unravel(flat: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.unravel_index(flat, grid.shape)
