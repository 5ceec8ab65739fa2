"""Push sampling: where to look, what hides it, and how to move it out of the way.

Stages run on one belief snapshot:

1. ``uncertainty_distance_map`` / ``select_target_locations`` pick uncertain cells
   far from anything confidently classified.
2. ``visibility_corridors`` cast 2D rays from a target to the shelf front and
   group them; ``score_corridor`` and ``select_occluder`` name the object to move.
3. ``pushing_corridor`` ranks 30 degree sectors around that object and
   ``sample_push_candidates`` draws pushes into the best one.
4. ``push_forward_belief`` predicts the belief after a push and ``push_vig``
   scores it with the view planner.

Grid cells are addressed ``(i, j)`` = (row from the open front, column along x).
Continuous cell coordinates put cell ``(i, j)`` at ``[i, i+1) x [j, j+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _raycast
from .actions import PushCandidate, ViewPose
from .belief import FREE_CLASS, PRIOR_VARIANCE, BeliefState
from .views import PlanningMaps, ViewPlanningConfig, best_of, planning_maps, sample_view_candidates, voxel_information


class SegmentationError(LookupError):
    pass


@dataclass(frozen=True)
class PushConfig:
    sem_uncertainty_floor: float = 0.1
    max_targets: int = 5
    min_target_separation: float = 10.0  # cells
    n_c: int = 32  # corridor width cap, cells
    sector_reach_cells: int = 8  # sector rays run this far past three footprint radii
    n_p: int = 8
    sector_angle_deg: float = 30.0
    k1: float = 2.0
    k2: float = 3.0
    k3: float = 4.0
    k4: float = 5.0
    rays_per_sector: int = 4
    unknown_uo: float = 0.5  # normalised u_o at or above which a cell counts as unknown
    obstacle_occ: float = 0.5  # a pusher start cell must be below this footprint occupancy
    min_segment_cells: int = 4
    push_margin_cells: float = 1.5
    start_offset_cells: tuple[float, float] = (1.0, 3.0)
    front_reach_cells: float = 10.0  # pusher may start this far in front of the shelf
    swept_retention: float = 0.5
    n_push_views: int = 8
    require_clearance: bool = True  # sectors with less free room than the push travel are disqualified
    own_margin_cells: int = 3
    clearance_occ: float = 0.6  # sweep obstacles must be confidently occupied; unknown space does not block

    def __post_init__(self):
        for name in ("sem_uncertainty_floor", "max_targets", "min_target_separation", "n_c", "sector_reach_cells", "n_p", "sector_angle_deg", "k1", "k2", "k3", "k4", "rays_per_sector", "min_segment_cells", "push_margin_cells", "n_push_views"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        n = 360.0 / self.sector_angle_deg
        if abs(n - round(n)) > 1e-9:
            raise ValueError("sector_angle_deg must divide 360")
        if not 0.0 <= self.swept_retention <= 1.0:
            raise ValueError("swept_retention must lie in [0, 1]")
        lo, hi = self.start_offset_cells
        if not 0 <= lo < hi:
            raise ValueError("start_offset_cells must be an increasing non-negative pair")

    @property
    def n_sectors(self) -> int:
        return int(round(360.0 / self.sector_angle_deg))


# -- 2D views of the belief --------------------------------------------------


def footprint_occupancy(b: BeliefState) -> np.ndarray:
    """Occupancy mean of the board layer: objects stand on it, so it marks footprints."""
    a, bb = b.alpha[:, :, 0], b.beta[:, :, 0]
    return a / (a + bb)


def normalized_uo(b: BeliefState) -> np.ndarray:
    """Column-mean occupancy variance relative to the prior, clamped to [0, 1]."""
    return np.clip(b.occupancy_variance().mean(axis=2) / PRIOR_VARIANCE, 0.0, 1.0)


@dataclass
class Segment:
    id: int
    cls: int
    cells: np.ndarray  # (n, 2) int rows/cols
    centroid: np.ndarray  # continuous (row, col) of the cell-centre mean

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def radius(self) -> float:
        d = self.cells + 0.5 - self.centroid
        return float(np.sqrt((d**2).sum(axis=1)).max()) + 0.5


@dataclass
class Segmentation:
    labels: np.ndarray  # (H, W) segment id or -1
    segments: list[Segment]
    hard: np.ndarray | None = None  # (H, W) hard class labels the segments came from

    def get(self, sid: int) -> Segment:
        for s in self.segments:
            if s.id == sid:
                return s
        raise SegmentationError(f"segment {sid} not present in the belief segmentation")


def segment_objects(b: BeliefState, min_cells: int = 4) -> Segmentation:
    """4-connected components of equal non-free hard labels, ids by (class, scan order)."""
    hard = b.hard_labels()
    labels = np.full(hard.shape, -1, dtype=np.int64)
    segs: list[Segment] = []
    for cls in np.unique(hard):
        if cls == FREE_CLASS:
            continue
        comp, n = ndimage.label(hard == cls)
        for k in range(1, n + 1):
            cells = np.argwhere(comp == k)
            if len(cells) < min_cells:
                continue
            sid = len(segs)
            labels[cells[:, 0], cells[:, 1]] = sid
            segs.append(Segment(sid, int(cls), cells, cells.mean(axis=0) + 0.5))
    return Segmentation(labels, segs, hard)


# -- targets ------------------------------------------------------------------


def uncertainty_distance_map(u_s: np.ndarray, u_o: np.ndarray, cfg: PushConfig = PushConfig()) -> np.ndarray:
    """Distance from each uncertain cell to the nearest certain one, scaled by its u_o.

    ``u_o`` is expected already normalised to [0, 1].
    """
    if u_s.shape != u_o.shape:
        raise ValueError("u_s and u_o must share a shape")
    uncertain = u_s >= cfg.sem_uncertainty_floor
    if uncertain.all():
        return np.zeros(u_s.shape)
    dist = ndimage.distance_transform_edt(uncertain)
    return dist * np.where(uncertain, u_o, 0.0)


def select_target_locations(dmap: np.ndarray, cfg: PushConfig = PushConfig()) -> list[tuple[int, int]]:
    flat = dmap.ravel()
    order = np.argsort(-flat, kind="stable")
    W = dmap.shape[1]
    chosen: list[tuple[int, int]] = []
    sep2 = cfg.min_target_separation**2
    for idx in order:
        if flat[idx] <= 0 or len(chosen) >= cfg.max_targets:
            break
        i, j = divmod(int(idx), W)
        if all((i - a) ** 2 + (j - c) ** 2 >= sep2 for a, c in chosen):
            chosen.append((i, j))
    return chosen


# -- visibility corridors -----------------------------------------------------


@dataclass
class RayRecord:
    front_col: int
    cells: np.ndarray  # flat i*W+j, ordered target -> front
    occluders: tuple[int, ...]  # front -> back
    length: float  # cells


@dataclass
class VisibilityCorridor:
    start: tuple[int, int]  # front cell (row 0, first column)
    width: int
    length: float  # normalised by shelf depth
    occluders: tuple[int, ...]
    p_occ: float
    n_occ_obj: int
    score: float = 0.0
    front_cols: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "start": list(self.start),
            "width": self.width,
            "length": self.length,
            "occluders": list(self.occluders),
            "p_occ": self.p_occ,
            "score": self.score,
        }


def supercover(p0, p1, H: int, W: int) -> np.ndarray:
    """In-grid cells crossed by the segment ``p0 -> p1`` (continuous (row, col))."""
    out = np.empty(2 * (H + W) + 8, dtype=np.int64)
    n = _raycast.supercover_2d(float(p0[0]), float(p0[1]), float(p1[0]), float(p1[1]), H, W, out)
    return out[:n]


def front_rays(labels: np.ndarray, target: tuple[int, int]) -> list[RayRecord]:
    H, W = labels.shape
    ti, tj = target
    own = labels[ti, tj]
    p0 = (ti + 0.5, tj + 0.5)
    rays = []
    flat_labels = labels.ravel()
    for x in range(W):
        p1 = (0.0, x + 0.5)
        cells = supercover(p0, p1, H, W)
        occ: list[int] = []
        for c in cells[::-1]:
            sid = int(flat_labels[c])
            if sid >= 0 and sid != own and sid not in occ:
                occ.append(sid)
        rays.append(RayRecord(x, cells, tuple(occ), math.hypot(p1[0] - p0[0], p1[1] - p0[1])))
    return rays


def corridor_occupancy(cells: np.ndarray, occ2d: np.ndarray, uo: np.ndarray, unknown_uo: float) -> float:
    """u_o-weighted mean occupancy scaled by the unknown-cell fraction."""
    if len(cells) == 0:
        return 0.0
    w = uo.ravel()[cells]
    o = occ2d.ravel()[cells]
    sw = w.sum()
    mean = float((w * o).sum() / sw) if sw > 0 else 0.0
    return mean * float((w >= unknown_uo).mean())


def score_corridor(c: VisibilityCorridor, cfg: PushConfig = PushConfig()) -> float:
    return cfg.k1 * c.width + cfg.k2 * c.length + cfg.k3 * c.p_occ + cfg.k4 * c.n_occ_obj


def group_rays(rays: list[RayRecord], H: int, occ2d: np.ndarray, uo: np.ndarray, cfg: PushConfig) -> list[VisibilityCorridor]:
    out: list[VisibilityCorridor] = []
    group: list[RayRecord] = []

    def flush():
        if not group:
            return
        cells = np.concatenate([r.cells for r in group])
        c = VisibilityCorridor(
            start=(0, group[0].front_col),
            width=len(group),
            length=float(np.mean([r.length for r in group])) / H,
            occluders=group[0].occluders,
            p_occ=corridor_occupancy(cells, occ2d, uo, cfg.unknown_uo),
            n_occ_obj=len(group[0].occluders),
            front_cols=tuple(r.front_col for r in group),
        )
        c.score = score_corridor(c, cfg)
        out.append(c)

    for r in rays:
        if group and (r.occluders != group[-1].occluders or len(group) >= cfg.n_c):
            flush()
            group = []
        group.append(r)
    flush()
    return out


def visibility_corridors(b: BeliefState, target: tuple[int, int], cfg: PushConfig = PushConfig(), seg: Segmentation | None = None) -> list[VisibilityCorridor]:
    H, W = b.grid.H, b.grid.W
    if not (0 <= target[0] < H and 0 <= target[1] < W):
        raise ValueError(f"target {target} outside the grid")
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    rays = front_rays(seg.labels, target)
    return group_rays(rays, H, footprint_occupancy(b), normalized_uo(b), cfg)


def select_occluder(corridors: list[VisibilityCorridor]) -> int | None:
    """Front-most occluder of the best corridor; ties prefer wider, then lower start column."""
    if not corridors:
        return None
    best = min(corridors, key=lambda c: (-c.score, -c.width, c.start[1]))
    return best.occluders[0] if best.occluders else None


# -- pushing corridors --------------------------------------------------------


@dataclass
class PushSector:
    index: int
    angle_lo: float  # radians, world frame (x = column, y = row)
    angle_hi: float
    mean_occupancy: float
    clearance: float  # metres the footprint can slide before touching an obstacle
    valid: bool
    travel: float = 0.0  # metres the push would move the object

    @property
    def direction(self) -> np.ndarray:
        a = 0.5 * (self.angle_lo + self.angle_hi)
        return np.array([math.cos(a), math.sin(a)])

    @property
    def span(self) -> float:
        return self.angle_hi - self.angle_lo

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "mean_occupancy": self.mean_occupancy,
            "clearance": self.clearance,
            "valid": self.valid,
        }


def sector_bounds(index: int, cfg: PushConfig) -> tuple[float, float]:
    """Sector ``index`` is centred on ``index * sector_angle`` so the shelf axes are sector centres."""
    a = math.radians(cfg.sector_angle_deg)
    return index * a - a / 2, index * a + a / 2


def sector_ray_angles(index: int, cfg: PushConfig) -> np.ndarray:
    lo, hi = sector_bounds(index, cfg)
    step = (hi - lo) / cfg.rays_per_sector
    return lo + (np.arange(cfg.rays_per_sector) + 0.5) * step


def unit_rc(phi: float) -> np.ndarray:
    """World angle to a (row, col) unit vector."""
    return np.array([math.sin(phi), math.cos(phi)])


def push_travel_cells(seg: Segment, u: np.ndarray, cfg: PushConfig) -> float:
    lo, hi = _support(seg, u)
    return hi - lo + cfg.push_margin_cells


def own_region(labels: np.ndarray, sid: int, margin: int, hard: np.ndarray | None = None, cls: int | None = None) -> np.ndarray:
    """Cells that belong to the object itself even if unseen or split off.

    Same-class fragments within ``2 * margin`` of the segment are merged in,
    then everything is dilated by ``margin``.
    """
    m = labels == sid
    if margin <= 0:
        return m
    if hard is not None and cls is not None:
        m = m | (ndimage.binary_dilation(m, iterations=2 * margin) & (hard == cls))
    return ndimage.binary_dilation(m, iterations=margin)


def sweep_free(seg: Segment, u: np.ndarray, blocked: np.ndarray, max_shift: int) -> tuple[int, int]:
    """Whole-cell shifts along ``u`` before the footprint meets an obstacle, and before it meets a shelf wall.

    Walls are the side and back boundaries plus the centroid crossing the
    open front edge.
    """
    H, W = blocked.shape
    if max_shift <= 0:
        return 0, 0
    s = np.arange(1, max_shift + 1, dtype=float)
    pos = seg.cells[None, :, :] + 0.5 + s[:, None, None] * u[None, None, :]
    r = np.floor(pos[..., 0]).astype(np.int64)
    c = np.floor(pos[..., 1]).astype(np.int64)
    wall = (c < 0) | (c >= W) | (r >= H)
    wall_any = wall.any(axis=1) | (seg.centroid[0] + s * u[0] < 0)
    inside = ~wall & (r >= 0)
    hit = np.zeros_like(wall)
    hit[inside] = blocked[r[inside], c[inside]]
    obst_any = hit.any(axis=1) | wall_any
    first = lambda m: int(np.argmax(m)) if m.any() else max_shift  # noqa: E731
    return first(obst_any), first(wall_any)


def sweep_blocked(occ2d: np.ndarray, seg: Segment, labels: np.ndarray, cfg: PushConfig, hard: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Obstacle mask for sliding ``seg`` (confidently occupied, not its own region) and the own region."""
    own = own_region(labels, seg.id, cfg.own_margin_cells, hard, seg.cls)
    return (occ2d >= cfg.clearance_occ) & ~own, own


def evaluate_sectors(occ2d: np.ndarray, seg: Segment, labels: np.ndarray, cfg: PushConfig, resolution: float, hard: np.ndarray | None = None) -> list[PushSector]:
    """Score every sector by ray occupancy and by how far the footprint slides along the bisector."""
    H, W = occ2d.shape
    c = seg.centroid
    reach = 3.0 * seg.radius + cfg.sector_reach_cells
    blocked, own = sweep_blocked(occ2d, seg, labels, cfg, hard)
    own_flat = own.ravel()
    occ_flat = occ2d.ravel()
    sectors = []
    for s in range(cfg.n_sectors):
        vals = []
        for phi in sector_ray_angles(s, cfg):
            u = unit_rc(phi)
            cells = supercover(c, c + reach * u, H, W)
            vals.append(occ_flat[cells[~own_flat[cells]]])
        allv = np.concatenate(vals)
        lo, hi = sector_bounds(s, cfg)
        u = unit_rc(0.5 * (lo + hi))
        travel = push_travel_cells(seg, u, cfg)
        free, wall = sweep_free(seg, u, blocked, int(math.ceil(travel + cfg.sector_reach_cells)))
        sectors.append(
            PushSector(
                index=s,
                angle_lo=lo,
                angle_hi=hi,
                mean_occupancy=float(allv.mean()) if len(allv) else 0.0,
                clearance=free * resolution,
                valid=wall >= travel and (not cfg.require_clearance or free >= travel),
                travel=travel * resolution,
            )
        )
    return sectors


def rank_sectors(sectors: list[PushSector]) -> list[PushSector]:
    return sorted((s for s in sectors if s.valid), key=lambda s: (round(s.mean_occupancy, 12), -round(s.clearance, 12), s.index))


def pushing_corridor(b: BeliefState, obj: int, cfg: PushConfig = PushConfig(), seg: Segmentation | None = None) -> list[PushSector]:
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    s = seg.get(obj)
    return rank_sectors(evaluate_sectors(footprint_occupancy(b), s, seg.labels, cfg, b.grid.resolution, seg.hard))


# -- candidates ---------------------------------------------------------------


def _support(seg: Segment, u: np.ndarray) -> tuple[float, float]:
    """Min and max of the segment's cell squares projected on ``u`` (row, col), relative to the centroid."""
    rel = seg.cells + 0.5 - seg.centroid
    proj = rel @ u
    pad = 0.5 * (abs(u[0]) + abs(u[1]))
    return float(proj.min() - pad), float(proj.max() + pad)


def rear_distance(seg: Segment, labels: np.ndarray, u: np.ndarray, step: float = 0.25) -> float:
    """Distance from the centroid, along ``-u``, to where the ray last leaves the segment."""
    H, W = labels.shape
    far = -_support(seg, u)[0]
    best = 0.0
    for t in np.arange(0.0, far + step, step):
        r = seg.centroid[0] - t * u[0]
        c = seg.centroid[1] - t * u[1]
        if 0 <= r < H and 0 <= c < W and labels[int(r), int(c)] == seg.id:
            best = t
    return best + step


def _back_offset(seg: Segment, labels: np.ndarray, u: np.ndarray) -> float:
    """Start distance behind the centroid: past the rear exit and, within a cell, past the whole footprint."""
    return max(rear_distance(seg, labels, u), -_support(seg, u)[0] - 1.0)


@dataclass
class CandidateSet:
    candidates: list[PushCandidate]
    diagnostic: str = ""


def _start_ok(p, labels: np.ndarray, occ2d: np.ndarray, cfg: PushConfig) -> bool:
    H, W = labels.shape
    r, c = p
    if not (-cfg.front_reach_cells <= r < H and 0 <= c < W):
        return False
    if r < 0:
        return True
    i, j = int(r), int(c)
    return labels[i, j] < 0 and occ2d[i, j] < cfg.obstacle_occ


def _ray_hits(seg: Segment, labels: np.ndarray, p, u: np.ndarray, reach: float, step: float = 0.25) -> bool:
    """Whether a pusher moving from ``p`` along ``u`` meets the segment within ``reach`` cells."""
    H, W = labels.shape
    t = np.arange(0.0, reach + step, step)
    r = p[0] + t * u[0]
    c = p[1] + t * u[1]
    ok = (r >= 0) & (r < H) & (c >= 0) & (c < W)
    return bool((labels[r[ok].astype(np.int64), c[ok].astype(np.int64)] == seg.id).any())


def _slides(seg: Segment, u: np.ndarray, blocked: np.ndarray | None, cfg: PushConfig) -> bool:
    """Whether the footprint can travel its full push length along ``u`` without meeting anything."""
    if blocked is None:
        return True
    travel = push_travel_cells(seg, u, cfg)
    free, wall = sweep_free(seg, u, blocked, int(math.ceil(travel)) + 1)
    return free >= travel and wall >= travel


def _cell_to_world(b: BeliefState, p) -> tuple[float, float]:
    ox, oy, _ = b.grid.origin
    res = b.grid.resolution
    return (ox + p[1] * res, oy + p[0] * res)


def _make_candidate(b: BeliefState, seg: Segment, start_rc, u_rc: np.ndarray, cfg: PushConfig) -> PushCandidate:
    lo, hi = _support(seg, u_rc)
    length = (hi - lo + cfg.push_margin_cells) * b.grid.resolution
    return PushCandidate(_cell_to_world(b, start_rc), (float(u_rc[1]), float(u_rc[0])), length, seg.id)


def sample_push_candidates(b: BeliefState, obj: int, sector: PushSector, cfg: PushConfig, rng: np.random.Generator, seg: Segmentation | None = None) -> CandidateSet:
    """Starts in the wedge behind the object opposite the sector; directions blend the sector edges."""
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    s = seg.get(obj)
    occ2d = footprint_occupancy(b)
    d0 = unit_rc(sector.angle_lo)
    d1 = unit_rc(sector.angle_hi)
    blocked = sweep_blocked(occ2d, s, seg.labels, cfg, seg.hard)[0] if cfg.require_clearance else None
    lo_off, hi_off = cfg.start_offset_cells
    out: list[PushCandidate] = []
    attempts = 0
    while len(out) < cfg.n_p and attempts < 20 * cfg.n_p:
        attempts += 1
        f = rng.random()
        u = (1.0 - f) * d0 + f * d1
        u /= np.linalg.norm(u)
        back = _back_offset(s, seg.labels, u)
        t = math.sqrt(rng.uniform((back + lo_off) ** 2, (back + hi_off) ** 2))
        p = s.centroid - t * u
        if _start_ok(p, seg.labels, occ2d, cfg) and _ray_hits(s, seg.labels, p, u, t - back + 2.0) and _slides(s, u, blocked, cfg):
            out.append(_make_candidate(b, s, p, u, cfg))
    diag = "" if out else f"no admissible start behind segment {obj} in sector {sector.index}"
    return CandidateSet(out, diag)


def sample_random_pushes(b: BeliefState, cfg: PushConfig, rng: np.random.Generator, seg: Segmentation | None = None) -> CandidateSet:
    """Baseline: uniform random segment and uniform random direction."""
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    if not seg.segments:
        return CandidateSet([], "no segments")
    occ2d = footprint_occupancy(b)
    lo_off, hi_off = cfg.start_offset_cells
    out: list[PushCandidate] = []
    attempts = 0
    while len(out) < cfg.n_p and attempts < 20 * cfg.n_p:
        attempts += 1
        s = seg.segments[int(rng.integers(len(seg.segments)))]
        phi = rng.uniform(0.0, 2.0 * math.pi)
        u = np.array([math.sin(phi), math.cos(phi)])
        back = _back_offset(s, seg.labels, u)
        t = rng.uniform(back + lo_off, back + hi_off)
        p = s.centroid - t * u
        if _start_ok(p, seg.labels, occ2d, cfg) and _ray_hits(s, seg.labels, p, u, t - back + 2.0):
            out.append(_make_candidate(b, s, p, u, cfg))
    return CandidateSet(out, "" if out else "no admissible random start")


# -- forward model ------------------------------------------------------------


@dataclass
class ColumnUpdate:
    """New values for a set of belief columns."""

    ii: np.ndarray
    jj: np.ndarray
    alpha: np.ndarray  # (n, D)
    beta: np.ndarray
    lam: np.ndarray  # (n, C)

    def apply(self, b: BeliefState) -> BeliefState:
        out = b.copy()
        out.alpha[self.ii, self.jj] = self.alpha
        out.beta[self.ii, self.jj] = self.beta
        out.lam[self.ii, self.jj] = self.lam
        return out


def push_shift_cells(b: BeliefState, p: PushCandidate) -> tuple[float, float]:
    s = p.length / b.grid.resolution
    return p.direction[1] * s, p.direction[0] * s


def free_rim(seg: Segment, segmentation: Segmentation) -> np.ndarray:
    """Free-labelled cells touching the segment (8-neighbourhood), as (n, 2) rows/cols."""
    m = segmentation.labels == seg.id
    rim = ndimage.binary_dilation(m, structure=np.ones((3, 3), bool)) & ~m & (segmentation.labels < 0)
    if segmentation.hard is not None:
        rim &= segmentation.hard == FREE_CLASS
    return np.argwhere(rim)


def forward_update(b: BeliefState, p: PushCandidate, seg: Segment, retention: float = 0.5, rim: np.ndarray | None = None) -> ColumnUpdate:
    """Translate the segment's excess evidence; vacated and swept columns lose theirs.

    ``rim`` cells (free space hugging the object) travel with it, so the
    blurred edge of a fractional shift mixes object and free evidence
    instead of thinning the object's.

    Vacated columns become weakly free with a ``retention`` share of the old
    excess mass; swept columns keep that share of their excess.  Destination
    columns hold only the moved evidence: whatever they held before was
    pushed through, so a thin object stays as opaque after a fractional shift.
    """
    H, W = b.grid.H, b.grid.W
    dr, dc = push_shift_cells(b, p)
    cells = seg.cells if rim is None or len(rim) == 0 else np.concatenate([seg.cells, rim])
    si, sj = cells[:, 0], cells[:, 1]
    src = si * W + sj
    ea = b.alpha[si, sj] - 1.0
    eb = b.beta[si, sj] - 1.0
    el = b.lam[si, sj] - 1.0

    # destination: bilinear split of every source column
    r = si + dr
    c = sj + dc
    r0 = np.floor(r).astype(np.int64)
    c0 = np.floor(c).astype(np.int64)
    fr = r - r0
    fc = c - c0
    ti = np.concatenate([r0, r0, r0 + 1, r0 + 1])
    tj = np.concatenate([c0, c0 + 1, c0, c0 + 1])
    wt = np.concatenate([(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc])
    srcn = np.tile(np.arange(len(si)), 4)
    ok = (wt > 0) & (ti >= 0) & (ti < H) & (tj >= 0) & (tj < W)
    ti, tj, wt, srcn = ti[ok], tj[ok], wt[ok], srcn[ok]
    dest, inv = np.unique(ti * W + tj, return_inverse=True)
    ma = np.zeros((len(dest), b.grid.D))
    mb = np.zeros_like(ma)
    ml = np.zeros((len(dest), b.n_classes))
    np.add.at(ma, inv, wt[:, None] * ea[srcn])
    np.add.at(mb, inv, wt[:, None] * eb[srcn])
    np.add.at(ml, inv, wt[:, None] * el[srcn])

    # swept band between source and destination
    steps = int(math.ceil(max(abs(dr), abs(dc))))
    band = []
    for st in range(1, steps):
        bi = si + int(round(st / steps * dr))
        bj = sj + int(round(st / steps * dc))
        okb = (bi >= 0) & (bi < H) & (bj >= 0) & (bj < W)
        band.append(bi[okb] * W + bj[okb])
    swept = np.unique(np.concatenate(band)) if band else np.zeros(0, dtype=np.int64)
    swept = np.setdiff1d(np.setdiff1d(swept, src), dest)

    keys = np.union1d(np.union1d(src, dest), swept)
    ii, jj = keys // W, keys % W
    na, nb, nl = b.alpha[ii, jj], b.beta[ii, jj], b.lam[ii, jj]

    k = np.searchsorted(keys, src)
    na[k] = 1.0
    nb[k] = 1.0 + retention * (ea + eb)
    nl[k] = 1.0
    nl[k, FREE_CLASS] = 1.0 + retention * el.sum(axis=1)

    k = np.searchsorted(keys, swept)
    na[k] = 1.0 + retention * (na[k] - 1.0)
    nb[k] = 1.0 + retention * (nb[k] - 1.0)
    nl[k] = 1.0 + retention * (nl[k] - 1.0)

    k = np.searchsorted(keys, dest)
    na[k] = 1.0 + ma
    nb[k] = 1.0 + mb
    nl[k] = 1.0 + ml
    return ColumnUpdate(ii, jj, na, nb, nl)


def push_forward_belief(b: BeliefState, p: PushCandidate, cfg: PushConfig = PushConfig(), seg: Segmentation | None = None) -> BeliefState:
    if p.length == 0:
        return b.copy()
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    s = seg.get(p.target_object)
    return forward_update(b, p, s, cfg.swept_retention, free_rim(s, seg)).apply(b)


def updated_maps(base: PlanningMaps, upd: ColumnUpdate, view_cfg: ViewPlanningConfig) -> PlanningMaps:
    """Planning maps of the post-push belief, recomputed only on changed columns."""
    g = base.grid
    blocked = base.blocked.copy()
    info = base.info.copy().reshape(g.shape)
    u_s = base.u_s.copy()
    a, bb = upd.alpha, upd.beta
    blocked[upd.ii, upd.jj] = a / (a + bb) >= view_cfg.theta_occ
    info[upd.ii, upd.jj] = voxel_information(a, bb, view_cfg.measure, view_cfg.info_floor)
    u_s[upd.ii, upd.jj] = upd.lam.shape[1] / upd.lam.sum(axis=1)
    return PlanningMaps(blocked, info.ravel(), u_s, g)


def push_vig(b: BeliefState, p: PushCandidate, view_cfg: ViewPlanningConfig, seed: int, cfg: PushConfig = PushConfig(), seg: Segmentation | None = None, base: PlanningMaps | None = None) -> tuple[float, ViewPose | None]:
    """Best expected VIG over sampled views of the predicted post-push belief.

    Every candidate of one planning step should share ``seed`` so they are
    compared on equal footing.
    """
    seg = seg if seg is not None else segment_objects(b, cfg.min_segment_cells)
    base = base if base is not None else planning_maps(b, view_cfg)
    if p.length == 0:
        maps = base
    else:
        s = seg.get(p.target_object)
        maps = updated_maps(base, forward_update(b, p, s, cfg.swept_retention, free_rim(s, seg)), view_cfg)
    poses = sample_view_candidates(maps, cfg.n_push_views, np.random.default_rng(seed), view_cfg)
    if not poses:
        return 0.0, None
    r = best_of(maps, poses, view_cfg)
    return r.vig, r.pose


# -- full pipeline ------------------------------------------------------------


@dataclass
class PushProposal:
    best: PushCandidate | None
    candidates: list[PushCandidate] = field(default_factory=list)
    telemetry: dict = field(default_factory=dict)


def informed_candidates(b: BeliefState, cfg: PushConfig, rng: np.random.Generator, seg: Segmentation) -> tuple[list[PushCandidate], dict]:
    occ2d = footprint_occupancy(b)
    uo = normalized_uo(b)
    dmap = uncertainty_distance_map(b.semantic_uncertainty(), uo, cfg)
    targets = select_target_locations(dmap, cfg)
    tel: dict = {"targets": [list(t) for t in targets], "corridor_scores": [], "occluders": [], "sectors": {}}
    occluders: list[int] = []
    for t in targets:
        rays = front_rays(seg.labels, t)
        cors = group_rays(rays, b.grid.H, occ2d, uo, cfg)
        tel["corridor_scores"].append([c.score for c in cors])
        o = select_occluder(cors)
        if o is not None and o not in occluders:
            occluders.append(o)
    tel["occluders"] = occluders
    cands: list[PushCandidate] = []
    for o in occluders:
        s = seg.get(o)
        ranked = rank_sectors(evaluate_sectors(occ2d, s, seg.labels, cfg, b.grid.resolution, seg.hard))
        tel["sectors"][str(o)] = [r.index for r in ranked]
        for sector in ranked:  # fall back down the ranking when no start fits behind the object
            cs = sample_push_candidates(b, o, sector, cfg, rng, seg)
            if cs.candidates:
                cands.extend(cs.candidates)
                break
            tel.setdefault("diagnostics", []).append(cs.diagnostic)
    return cands, tel


def propose_push(b: BeliefState, view_cfg: ViewPlanningConfig, cfg: PushConfig, rng: np.random.Generator, method: str = "informed", base: PlanningMaps | None = None) -> PushProposal:
    """Run the sampler and score every candidate by ``push_vig``."""
    seg = segment_objects(b, cfg.min_segment_cells)
    if method == "informed":
        cands, tel = informed_candidates(b, cfg, rng, seg)
    elif method == "random":
        cs = sample_random_pushes(b, cfg, rng, seg)
        cands, tel = cs.candidates, {}
    else:
        raise ValueError(f"unknown push method {method!r}")
    if not cands:
        return PushProposal(None, [], tel)
    base = base if base is not None else planning_maps(b, view_cfg)
    seed = int(rng.integers(2**31))
    scored = [c.with_vig(push_vig(b, c, view_cfg, seed, cfg, seg, base)[0]) for c in cands]
    best = max(range(len(scored)), key=lambda k: (scored[k].predicted_vig, -k))
    tel["candidates"] = [c.to_dict() for c in scored]
    return PushProposal(scored[best], scored, tel)
