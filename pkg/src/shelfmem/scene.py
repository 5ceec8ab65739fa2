"""Procedural shelf worlds, ground-truth maps and quasi-static push dynamics.

Objects are extruded convex footprints standing on the shelf board.  Pushes
translate objects without rotation or friction; anything the pushed object
sweeps through is shoved just far enough to clear it, transitively up to a
chain depth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .actions import PushCandidate
from .belief import FREE_CLASS, GridSpec
from .geometry import (
    box_polygon,
    circle_polygon,
    minkowski_sum,
    points_in_polygon,
    polygon_area,
    polygons_overlap,
    ray_polygon_interval,
)


class SceneGenerationError(RuntimeError):
    pass


class PushPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    cls: int
    shape: str  # "box" | "cylinder"
    size_x: tuple[float, float]  # box x-size range, or cylinder radius range
    size_y: tuple[float, float] = (0.0, 0.0)  # unused for cylinders
    height: tuple[float, float] = (0.05, 0.2)


DEFAULT_CATALOG: tuple[CatalogEntry, ...] = (
    CatalogEntry("cracker_box", 1, "box", (0.08, 0.14), (0.04, 0.07), (0.15, 0.21)),
    CatalogEntry("sugar_box", 2, "box", (0.05, 0.09), (0.03, 0.05), (0.12, 0.18)),
    CatalogEntry("tomato_can", 3, "cylinder", (0.025, 0.035), height=(0.08, 0.11)),
    CatalogEntry("mustard", 4, "box", (0.05, 0.08), (0.03, 0.05), (0.14, 0.19)),
    CatalogEntry("tuna_can", 5, "cylinder", (0.03, 0.045), height=(0.03, 0.05)),
    CatalogEntry("pudding_box", 6, "box", (0.06, 0.09), (0.04, 0.06), (0.03, 0.05)),
    CatalogEntry("gelatin_box", 7, "box", (0.05, 0.08), (0.03, 0.05), (0.025, 0.04)),
    CatalogEntry("potted_meat", 8, "box", (0.05, 0.07), (0.03, 0.05), (0.07, 0.09)),
    CatalogEntry("mug", 9, "cylinder", (0.035, 0.045), height=(0.07, 0.09)),
    CatalogEntry("bleach", 10, "box", (0.06, 0.10), (0.05, 0.07), (0.18, 0.22)),
)

# a tall, thin panel about 40% of the shelf width: hides what stands behind it from every camera pose
WALL_ENTRY = CatalogEntry("panel", 11, "box", (0.28, 0.34), (0.02, 0.035), (0.30, 0.32))


@dataclass(frozen=True)
class SceneObject:
    id: int
    cls: int
    shape: str
    dims: tuple[float, ...]  # (sx, sy) for boxes, (radius,) for cylinders
    height: float
    x: float
    y: float
    yaw: float = 0.0
    name: str = ""
    fallen: bool = False

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError(f"object {self.id}: height must be positive")
        if self.shape not in ("box", "cylinder"):
            raise ValueError(f"object {self.id}: unknown shape {self.shape!r}")

    @property
    def footprint(self) -> np.ndarray:
        if self.shape == "box":
            return box_polygon(self.x, self.y, self.dims[0], self.dims[1], self.yaw)
        return circle_polygon(self.x, self.y, self.dims[0])

    @property
    def area(self) -> float:
        return polygon_area(self.footprint)

    def inflated(self, gap: float) -> np.ndarray:
        if self.shape == "box":
            return box_polygon(self.x, self.y, self.dims[0] + gap, self.dims[1] + gap, self.yaw)
        return circle_polygon(self.x, self.y, self.dims[0] + 0.5 * gap)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.cls,
            "name": self.name,
            "shape": self.shape,
            "dims": list(self.dims),
            "height": self.height,
            "pose": [self.x, self.y, self.yaw],
            "fallen": self.fallen,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneObject":
        x, y, yaw = d["pose"]
        return cls(d["id"], d["class"], d["shape"], tuple(d["dims"]), d["height"], x, y, yaw, d.get("name", ""), d.get("fallen", False))


@dataclass(frozen=True)
class Shelf:
    """Interior bounds; the open front is the line y = 0."""

    width: float
    depth: float
    height: float

    @classmethod
    def from_grid(cls, grid: GridSpec) -> "Shelf":
        return cls(grid.width_m, grid.depth_m, grid.height_m)


@dataclass(frozen=True)
class Scene:
    shelf: Shelf
    objects: tuple[SceneObject, ...]
    seed: int = 0

    def object(self, oid: int) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    @property
    def standing(self) -> tuple[SceneObject, ...]:
        return tuple(o for o in self.objects if not o.fallen)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "seed": self.seed,
            "shelf": {"width": self.shelf.width, "depth": self.shelf.depth, "height": self.shelf.height, "front_y": 0.0},
            "objects": [o.to_dict() for o in self.objects],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        s = d["shelf"]
        return cls(Shelf(s["width"], s["depth"], s["height"]), tuple(SceneObject.from_dict(o) for o in d["objects"]), d["seed"])

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        return cls.from_dict(json.loads(text))


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(scene.to_json())


def load_scene(path: str | Path) -> Scene:
    return Scene.from_json(Path(path).read_text())


# -- generation -------------------------------------------------------------


def _sample_dims(entry: CatalogEntry, rng: np.random.Generator) -> tuple[tuple[float, ...], float, float]:
    if entry.shape == "box":
        dims = (float(rng.uniform(*entry.size_x)), float(rng.uniform(*entry.size_y)))
        area = dims[0] * dims[1]
    else:
        dims = (float(rng.uniform(*entry.size_x)),)
        area = np.pi * dims[0] ** 2
    return dims, float(rng.uniform(*entry.height)), float(area)


def _half_extent(shape: str, dims, yaw: float) -> tuple[float, float]:
    if shape == "cylinder":
        return dims[0], dims[0]
    c, s = abs(np.cos(yaw)), abs(np.sin(yaw))
    return 0.5 * (dims[0] * c + dims[1] * s), 0.5 * (dims[0] * s + dims[1] * c)


def generate_scene(
    seed: int,
    n_objects: int = 20,
    shelf: Shelf | None = None,
    catalog: tuple[CatalogEntry, ...] = DEFAULT_CATALOG,
    *,
    n_walls: int = 0,
    gap: float = 0.01,
    max_yaw: float = np.deg2rad(15.0),
    max_attempts: int = 400,
    wall_front: tuple[float, float] = (0.20, 0.23),
    wall_lane: float = 0.02,
) -> Scene:
    """Rejection-sample a cluttered shelf.

    Objects with above-median footprint area draw their depth from a
    front-weighted triangular distribution, the rest from a back-weighted
    one.  ``n_walls`` extra tall, wide panels are placed first; they are
    what makes a region unobservable without pushing.  A panel stands with
    its front face ``wall_front`` metres deep, a few centimetres from a side
    wall (alternating sides).  Nothing else may enter its lane, the depth
    band it covers widened by ``wall_lane``, so it can be slid sideways, nor
    the forecourt between its face and the open front, so from the front it
    is the first thing in the way.
    """
    if not catalog:
        raise SceneGenerationError("object catalog is empty")
    if n_objects < 1:
        raise SceneGenerationError(f"n_objects must be positive, got {n_objects}")
    shelf = shelf or Shelf.from_grid(GridSpec())
    rng = np.random.default_rng(seed)

    specs = []
    for _ in range(n_objects):
        entry = catalog[int(rng.integers(len(catalog)))]
        dims, height, area = _sample_dims(entry, rng)
        specs.append((entry, dims, height, area))
    median_area = float(np.median([s[3] for s in specs]))

    placed: list[SceneObject] = []

    lanes: list[tuple[float, float]] = []  # depth bands kept clear for sliding walls
    courts: list[tuple[float, float, float]] = []  # (x_lo, x_hi, y_hi) kept clear in front of walls

    def try_place(oid, entry, dims, height, depth_sampler) -> SceneObject:
        for _ in range(max_attempts):
            yaw = float(rng.uniform(-max_yaw, max_yaw)) if entry.shape == "box" else 0.0
            hx, hy = _half_extent(entry.shape, dims, yaw)
            if 2 * hx >= shelf.width or 2 * hy >= shelf.depth:
                break
            x = float(rng.uniform(hx, shelf.width - hx))
            y = float(np.clip(depth_sampler(), hy, shelf.depth - hy))
            if any(y - hy < hi and y + hy > lo for lo, hi in lanes):
                continue
            if any(y - hy < y1 and x - hx < x1 + (y1 - y + hy) and x + hx > x0 - (y1 - y + hy) for x0, x1, y1 in courts):
                continue
            cand = SceneObject(oid, entry.cls, entry.shape, dims, height, x, y, yaw, entry.name)
            poly = cand.inflated(gap)
            if all(not polygons_overlap(poly, o.footprint) for o in placed):
                return cand
        raise SceneGenerationError(f"seed {seed}: could not place object {oid} ({entry.name}) after {max_attempts} attempts")

    front = lambda: rng.triangular(0.0, 0.0, shelf.depth)  # noqa: E731
    back = lambda: rng.triangular(0.0, shelf.depth, shelf.depth)  # noqa: E731
    left = bool(rng.random() < 0.5)
    for w in range(n_walls):
        dims, height, _ = _sample_dims(WALL_ENTRY, rng)
        side_gap = float(rng.uniform(0.03, 0.06))
        x = side_gap + dims[0] / 2 if left else shelf.width - side_gap - dims[0] / 2
        y = float(rng.uniform(*wall_front)) + dims[1] / 2
        wall = SceneObject(n_objects + w, WALL_ENTRY.cls, "box", dims, height, x, y, 0.0, WALL_ENTRY.name)
        if any(polygons_overlap(wall.inflated(gap), o.footprint) for o in placed):
            raise SceneGenerationError(f"seed {seed}: walls do not fit side by side")
        placed.append(wall)
        lanes.append((y - dims[1] / 2 - wall_lane, y + dims[1] / 2 + wall_lane))
        courts.append((x - dims[0] / 2 - wall_lane, x + dims[0] / 2 + wall_lane, y))
        left = not left

    # big objects first so that rejection sampling rarely starves them
    order = sorted(range(n_objects), key=lambda k: -specs[k][3])
    for k in order:
        entry, dims, height, area = specs[k]
        placed.append(try_place(k, entry, dims, height, front if area > median_area else back))

    objects = tuple(sorted(placed, key=lambda o: o.id))
    return Scene(shelf, objects, seed)


# -- ground truth -----------------------------------------------------------


def _object_cells(obj: SceneObject, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    poly = obj.footprint
    ox, oy, _ = grid.origin
    res = grid.resolution
    j0 = max(int(np.floor((poly[:, 0].min() - ox) / res)), 0)
    j1 = min(int(np.ceil((poly[:, 0].max() - ox) / res)), grid.W)
    i0 = max(int(np.floor((poly[:, 1].min() - oy) / res)), 0)
    i1 = min(int(np.ceil((poly[:, 1].max() - oy) / res)), grid.H)
    if j1 <= j0 or i1 <= i0:
        return np.empty(0, int), np.empty(0, int)
    ii, jj = np.mgrid[i0:i1, j0:j1]
    pts = np.stack([ox + (jj.ravel() + 0.5) * res, oy + (ii.ravel() + 0.5) * res], axis=1)
    inside = points_in_polygon(poly, pts)
    return ii.ravel()[inside], jj.ravel()[inside]


def ground_truth_maps(scene: Scene, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Boolean voxel occupancy (H, W, D) and semantic class map (H, W)."""
    occ = np.zeros(grid.shape, dtype=bool)
    sem = np.full((grid.H, grid.W), FREE_CLASS, dtype=np.int64)
    top = np.zeros((grid.H, grid.W))
    centers = (np.arange(grid.D) + 0.5) * grid.resolution
    for obj in scene.standing:
        ii, jj = _object_cells(obj, grid)
        if len(ii) == 0:
            continue
        nk = int(np.count_nonzero(centers < obj.height))
        occ[ii, jj, :nk] = True
        higher = obj.height > top[ii, jj]
        sem[ii[higher], jj[higher]] = obj.cls
        top[ii[higher], jj[higher]] = obj.height
    return occ, sem


# -- push dynamics ----------------------------------------------------------


@dataclass(frozen=True)
class PushPhysics:
    max_chain: int = 3
    tip_threshold: float = 0.15  # m of forced clearance motion in one step
    contact_reach: float = 0.03  # m the pusher travels looking for contact


@dataclass
class PushOutcome:
    displacements: dict[int, tuple[float, float]]
    fallen: frozenset[int] = field(default_factory=frozenset)
    secondary_contacts: int = 0
    target_id: int | None = None

    @property
    def total_displacement(self) -> float:
        return float(sum(np.hypot(dx, dy) for dx, dy in self.displacements.values()))

    def to_dict(self) -> dict:
        return {
            "displacements": {str(k): list(v) for k, v in sorted(self.displacements.items())},
            "fallen": sorted(self.fallen),
            "secondary_contacts": self.secondary_contacts,
            "target_id": self.target_id,
            "total_displacement": self.total_displacement,
        }


def _clearance(mover: np.ndarray, travel: float, other: np.ndarray, d: np.ndarray) -> float:
    """Motion along ``d`` that ``other`` needs so ``mover`` can travel ``travel`` past it."""
    contact = minkowski_sum(other, -mover)  # translations of mover that touch other
    iv = ray_polygon_interval(contact, np.zeros(2), d)
    if iv is None:
        return 0.0
    s_in, s_out = iv
    if s_out <= 1e-12 or s_in >= travel - 1e-12 or s_out - s_in <= 1e-12:
        return 0.0
    return travel - max(s_in, 0.0)


def _outside_shelf(obj: SceneObject, shelf: Shelf, tol: float = 1e-9) -> bool:
    """Driven through a side or back wall, or tipped over the open front edge.

    Overhanging the front is fine while the centre stays on the board.
    """
    poly = obj.footprint
    return bool(
        (poly[:, 0] < -tol).any()
        or (poly[:, 0] > shelf.width + tol).any()
        or (poly[:, 1] > shelf.depth + tol).any()
        or obj.y < 0.0
    )


def find_contact(scene: Scene, push: PushCandidate, reach: float) -> int | None:
    start = np.asarray(push.start)
    d = np.asarray(push.direction)
    best, best_t = None, np.inf
    for o in scene.standing:
        iv = ray_polygon_interval(o.footprint, start, d)
        if iv is None:
            continue
        t_in, t_out = iv
        if t_out > 0 and t_in <= reach and t_in < best_t:
            best, best_t = o.id, t_in
    return best


def apply_push(scene: Scene, push: PushCandidate, physics: PushPhysics = PushPhysics()) -> tuple[Scene, PushOutcome]:
    """Execute a push; returns the new scene and what moved or fell.

    The pusher travels from ``push.start`` along ``push.direction``; the first
    footprint within ``contact_reach`` is the pushed object and travels
    ``push.length``.  Nothing moves if the pusher finds no contact.
    """
    if push.length <= 0:
        raise PushPreconditionError(f"push length must be positive, got {push.length}")
    start = np.asarray(push.start)
    for o in scene.standing:
        if points_in_polygon(o.footprint, start[None])[0]:
            raise PushPreconditionError(f"push start {push.start} lies inside object {o.id}")

    zero = {o.id: (0.0, 0.0) for o in scene.objects}
    target = find_contact(scene, push, physics.contact_reach)
    if target is None:
        return scene, PushOutcome(zero, frozenset(), 0, None)

    d = np.asarray(push.direction)
    polys = {o.id: o.footprint for o in scene.standing}
    travel = {target: push.length}
    frontier = [target]
    for _ in range(physics.max_chain):
        moved_now = []
        for a in sorted(frontier):
            for b in sorted(polys):
                if b == target or b == a:
                    continue
                t = _clearance(polys[a], travel[a], polys[b], d)
                if t > travel.get(b, 0.0) + 1e-12:
                    travel[b] = t
                    moved_now.append(b)
        frontier = sorted(set(moved_now))
        if not frontier:
            break

    new_objects = []
    fallen = set()
    disp = dict(zero)
    for o in scene.objects:
        t = travel.get(o.id, 0.0)
        if t == 0.0:
            new_objects.append(o)
            continue
        dx, dy = float(t * d[0]), float(t * d[1])
        disp[o.id] = (dx, dy)
        moved = replace(o, x=o.x + dx, y=o.y + dy)
        tipped = o.id != target and t > physics.tip_threshold
        if tipped or _outside_shelf(moved, scene.shelf):
            moved = replace(moved, fallen=True)
            fallen.add(o.id)
        new_objects.append(moved)
    secondary = sum(1 for k in travel if k != target)
    return Scene(scene.shelf, tuple(new_objects), scene.seed), PushOutcome(disp, frozenset(fallen), secondary, target)


def check_termination_fall(outcome: PushOutcome) -> bool:
    return len(outcome.fallen) > 0
