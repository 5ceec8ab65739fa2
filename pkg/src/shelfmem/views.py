"""Next-best-view side: action normalisation, observation encoding, rewards,
feasibility, occlusion-aware volumetric information gain and a greedy planner.

The greedy planner stands in for a learned policy; anything that maps an
``EnrichedObservation`` to a 6-vector in ``[-1, 1]`` can replace it through
``PolicyAdapter``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import _raycast
from .actions import ViewPose
from .belief import PRIOR_VARIANCE, BeliefState, ContractError, GridSpec, project_height_map
from .scene import Scene, ground_truth_maps
from .sensor import CameraModel, Observation, integrate_observation, ray_directions_many, render_view

log = logging.getLogger(__name__)


class ActionRangeError(ValueError):
    pass


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class ActionBoxes:
    """Sampling boxes for camera position and look-at target (world metres)."""

    cam_lo: tuple[float, float, float]
    cam_hi: tuple[float, float, float]
    target_lo: tuple[float, float, float]
    target_hi: tuple[float, float, float]

    @classmethod
    def for_grid(cls, grid: GridSpec, cam_size=(0.8, 0.2, 0.2), cam_y=(-0.15, 0.05), cam_z=(0.12, 0.32), target_z=(0.0, 0.15)) -> "ActionBoxes":
        cx = grid.origin[0] + 0.5 * grid.width_m
        ox, oy, oz = grid.origin
        return cls(
            cam_lo=(cx - cam_size[0] / 2, oy + cam_y[0], oz + cam_z[0]),
            cam_hi=(cx + cam_size[0] / 2, oy + cam_y[1], oz + cam_z[1]),
            target_lo=(ox, oy, oz + target_z[0]),
            target_hi=(ox + grid.width_m, oy + grid.depth_m, oz + target_z[1]),
        )

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.cam_lo + self.target_lo)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.cam_hi + self.target_hi)

    def center(self) -> ViewPose:
        c = 0.5 * (self.lo + self.hi)
        return ViewPose(tuple(c[:3]), tuple(c[3:]))


def _in_box(p, lo, hi, tol=1e-12) -> bool:
    p, lo, hi = np.asarray(p), np.asarray(lo), np.asarray(hi)
    return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))


def normalize_action(v: ViewPose, boxes: ActionBoxes) -> np.ndarray:
    x = np.array(v.cam + v.target)
    lo, hi = boxes.lo, boxes.hi
    if not _in_box(x, lo, hi):
        raise ActionRangeError(f"pose {x.tolist()} lies outside the action boxes")
    return (x - lo) / (hi - lo) * 2.0 - 1.0


def denormalize_action(a, boxes: ActionBoxes) -> ViewPose:
    a = np.asarray(a, dtype=float)
    if a.shape != (6,):
        raise ActionRangeError(f"action must be a 6-vector, got shape {a.shape}")
    if np.any(np.abs(a) > 1.0 + 1e-12):
        raise ActionRangeError(f"action components must lie in [-1, 1], got {a.tolist()}")
    lo, hi = boxes.lo, boxes.hi
    x = lo + (a + 1.0) * 0.5 * (hi - lo)
    return ViewPose(tuple(x[:3]), tuple(x[3:]))


# -- history and observation -------------------------------------------------


@dataclass
class HistoryEntry:
    pose: ViewPose
    action: np.ndarray  # normalised 6-vector
    height_map: np.ndarray  # normalised, (H, W)


class ViewHistory:
    """Ring buffer of the last ``n_hist`` executed views, oldest first."""

    def __init__(self, n_hist: int = 4):
        self.n_hist = n_hist
        self.entries: deque[HistoryEntry] = deque(maxlen=n_hist)

    def push(self, entry: HistoryEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class RewardConfig:
    w1: float = 10.0
    w2: float = 2.0
    gamma_p: float = 0.5
    gamma_e: float = 0.5
    theta_p: float = 0.1
    theta_e: float = 0.034
    r_feasibility: float = 1.0

    def __post_init__(self):
        for name in ("theta_p", "theta_e", "r_feasibility"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class EnrichedObservation:
    height: np.ndarray
    semantic: np.ndarray
    u_o: np.ndarray
    u_s: np.ndarray
    past_heights: np.ndarray  # (n_hist, H, W)
    past_actions: np.ndarray  # (n_hist, 6)

    def maps(self) -> np.ndarray:
        return np.stack([self.height, self.semantic, self.u_o, self.u_s])

    def zeros_like(self) -> "EnrichedObservation":
        return EnrichedObservation(*(np.zeros_like(x) for x in (self.height, self.semantic, self.u_o, self.u_s, self.past_heights, self.past_actions)))

    def to_bytes(self) -> bytes:
        parts = (self.height, self.semantic, self.u_o, self.u_s, self.past_heights, self.past_actions)
        return b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)


def normalized_height_map(b: BeliefState, theta_occ: float) -> np.ndarray:
    return project_height_map(b, theta_occ) / b.grid.height_m


def encode_observation(b: BeliefState, h: ViewHistory, theta_occ: float = 0.87) -> EnrichedObservation:
    H, W = b.grid.H, b.grid.W
    past_h = np.zeros((h.n_hist, H, W))
    past_a = np.zeros((h.n_hist, 6))
    for slot, e in enumerate(h):
        past_h[slot] = e.height_map
        past_a[slot] = e.action
    # u_s <= 1 whenever evidence only accumulates on the unit prior
    return EnrichedObservation(
        height=normalized_height_map(b, theta_occ),
        semantic=b.hard_labels() / (b.n_classes - 1),
        u_o=b.occupancy_variance().max(axis=2) / 0.25,
        u_s=b.semantic_uncertainty() / 1.0,
        past_heights=past_h,
        past_actions=past_a,
    )


# -- feasibility and rewards -------------------------------------------------


def feasibility(v: ViewPose, source, boxes: ActionBoxes, grid: GridSpec, theta_occ: float = 0.87, blocked: np.ndarray | None = None) -> bool:
    """Geometric stand-in for a motion-planner reachability check.

    ``source`` is the ground-truth ``Scene`` (simulation) or a ``BeliefState``
    (planning); ``blocked`` may pass a precomputed voxel blocking grid.
    """
    if not _in_box(v.cam, boxes.cam_lo, boxes.cam_hi):
        return False
    if not _in_box(v.target, boxes.target_lo, boxes.target_hi):
        return False
    ox, oy, oz = grid.origin
    cx, cy, cz = v.cam
    inside_depth = oy < cy < oy + grid.depth_m
    if inside_depth:
        # within the shelf depth the camera must sit inside the interior, not in a wall
        if not (ox < cx < ox + grid.width_m and oz < cz < oz + grid.height_m):
            return False
        if blocked is None:
            if isinstance(source, Scene):
                blocked = ground_truth_maps(source, grid)[0]
            elif isinstance(source, BeliefState):
                blocked = source.occupancy_mean() >= theta_occ
        if blocked is not None:
            i = int((cy - oy) / grid.resolution)
            j = int((cx - ox) / grid.resolution)
            k = int((cz - oz) / grid.resolution)
            if blocked[min(i, grid.H - 1), min(j, grid.W - 1), min(k, grid.D - 1)]:
                return False
    return True


def view_distances(v: ViewPose, past: ViewPose) -> tuple[float, float]:
    """Euclidean camera distance and cosine distance of the viewing directions."""
    p = float(np.linalg.norm(np.asarray(v.cam) - np.asarray(past.cam)))
    e = float(1.0 - np.clip(np.dot(v.direction, past.direction), -1.0, 1.0))
    return p, e


def repeat_penalty(v: ViewPose, h, cfg: RewardConfig = RewardConfig()) -> float:
    total = 0.0
    for e in h:
        past = e.pose if isinstance(e, HistoryEntry) else e
        p_dist, e_dist = view_distances(v, past)
        if p_dist <= cfg.theta_p and e_dist <= cfg.theta_e:
            total -= cfg.gamma_p * (cfg.theta_p - p_dist) / cfg.theta_p + cfg.gamma_e * (cfg.theta_e - e_dist) / cfg.theta_e
    return total


def uncertainty_reward(b_before: BeliefState, b_after: BeliefState) -> float:
    """Drop in mean occupancy and semantic uncertainty, each relative to its prior value."""
    if not b_before.same_grid(b_after):
        raise ContractError("beliefs live on different grids")
    d_o = (b_before.occupancy_variance().mean() - b_after.occupancy_variance().mean()) / PRIOR_VARIANCE
    d_s = (b_before.semantic_uncertainty().mean() - b_after.semantic_uncertainty().mean()) / 1.0
    return float(d_o + d_s)


def step_reward(feasible: bool, r_uncertainty: float = 0.0, r_repeat: float = 0.0, cfg: RewardConfig = RewardConfig()) -> float:
    if not feasible:
        return -cfg.r_feasibility
    return cfg.w1 * r_uncertainty + cfg.w2 * r_repeat


# -- information gain ---------------------------------------------------------


@dataclass(frozen=True)
class ViewPlanningConfig:
    boxes: ActionBoxes
    camera: CameraModel = CameraModel(nx=24, ny=18)
    theta_occ: float = 0.87
    n_candidates: int = 64
    measure: str = "variance"  # or "entropy"
    info_floor: float = 0.02  # voxels with variance below this carry no information
    target_bias: float = 0.5
    top_q: float = 0.1
    retry_factor: int = 20

    def __post_init__(self):
        if self.measure not in ("variance", "entropy"):
            raise ValueError(f"unknown information measure {self.measure!r}")


@dataclass
class PlanningMaps:
    """Per-snapshot arrays the VIG kernels consume."""

    blocked: np.ndarray  # (H, W, D) bool
    info: np.ndarray  # flat float64
    u_s: np.ndarray  # (H, W)
    grid: GridSpec


def voxel_information(alpha: np.ndarray, beta: np.ndarray, measure: str, floor: float) -> np.ndarray:
    s = alpha + beta
    var = alpha * beta / (s * s * (s + 1.0))
    if measure == "variance":
        val = var
    else:
        p = alpha / s
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -(p * np.log(p) + (1 - p) * np.log(1 - p))
        val = np.nan_to_num(val)
    return np.where(var >= floor, val, 0.0)


def planning_maps(b: BeliefState, cfg: ViewPlanningConfig) -> PlanningMaps:
    blocked = b.occupancy_mean() >= cfg.theta_occ
    info = voxel_information(b.alpha, b.beta, cfg.measure, cfg.info_floor).ravel()
    return PlanningMaps(blocked, info, b.semantic_uncertainty(), b.grid)


def _maps(b_or_maps, cfg: ViewPlanningConfig) -> PlanningMaps:
    return b_or_maps if isinstance(b_or_maps, PlanningMaps) else planning_maps(b_or_maps, cfg)


def vig_of_poses(maps: PlanningMaps, poses: list[ViewPose], cam: CameraModel) -> np.ndarray:
    if not poses:
        return np.zeros(0)
    g = maps.grid
    origins = np.array([(np.asarray(p.cam) - np.asarray(g.origin)) / g.resolution for p in poses])
    dirs = ray_directions_many(poses, cam)
    return _raycast.vig_many(origins, dirs, cam.max_range / g.resolution, maps.blocked, maps.info)


def expected_vig(b, v: ViewPose, cfg: ViewPlanningConfig) -> float:
    maps = _maps(b, cfg)
    return float(vig_of_poses(maps, [v], cfg.camera)[0])


def sample_view_candidates(maps: PlanningMaps, n: int, rng: np.random.Generator, cfg: ViewPlanningConfig) -> list[ViewPose]:
    g = maps.grid
    boxes = cfg.boxes
    us = maps.u_s.ravel()
    thr = np.quantile(us, 1.0 - cfg.top_q)
    hot = np.flatnonzero(us >= thr)
    out: list[ViewPose] = []
    attempts = 0
    while len(out) < n and attempts < n * cfg.retry_factor:
        attempts += 1
        cam = rng.uniform(boxes.cam_lo, boxes.cam_hi)
        tgt = rng.uniform(boxes.target_lo, boxes.target_hi)
        if rng.random() < cfg.target_bias and len(hot):
            cell = hot[rng.integers(len(hot))]
            i, j = divmod(int(cell), g.W)
            x, y = g.cell_to_world(i, j)
            tgt[0] = np.clip(x, boxes.target_lo[0], boxes.target_hi[0])
            tgt[1] = np.clip(y, boxes.target_lo[1], boxes.target_hi[1])
        if np.allclose(cam, tgt):
            continue
        pose = ViewPose(tuple(cam), tuple(tgt))
        if feasibility(pose, None, boxes, g, cfg.theta_occ, blocked=maps.blocked):
            out.append(pose)
    return out


@dataclass
class NBVResult:
    pose: ViewPose
    vig: float
    candidate_vigs: list[float] = field(default_factory=list)


def greedy_nbv(b, n_candidates: int, rng: np.random.Generator, cfg: ViewPlanningConfig) -> NBVResult:
    """Sample feasible poses and return the one with the largest expected VIG."""
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    maps = _maps(b, cfg)
    poses = sample_view_candidates(maps, n_candidates, rng, cfg)
    if not poses:
        raise PlanningError("no feasible view candidate found")
    vigs = vig_of_poses(maps, poses, cfg.camera)
    best = int(np.argmax(vigs))
    assert all(vigs[best] >= v for v in vigs)
    return NBVResult(poses[best], float(vigs[best]), [float(v) for v in vigs])


def best_of(maps: PlanningMaps, poses: list[ViewPose], cfg: ViewPlanningConfig) -> NBVResult:
    vigs = vig_of_poses(maps, poses, cfg.camera)
    best = int(np.argmax(vigs))
    return NBVResult(poses[best], float(vigs[best]), [float(v) for v in vigs])


# -- policy seam ---------------------------------------------------------------


class ViewPolicy(Protocol):
    def __call__(self, obs: EnrichedObservation) -> np.ndarray: ...


class PolicyAdapter:
    """Wraps any view policy; out-of-range actions are clamped and counted."""

    def __init__(self, policy: Callable[[EnrichedObservation], np.ndarray]):
        self.policy = policy
        self.clamp_warnings = 0

    def __call__(self, obs: EnrichedObservation) -> np.ndarray:
        return evaluate_external_policy(self.policy, obs, self)


def evaluate_external_policy(policy, obs: EnrichedObservation, counter: PolicyAdapter | None = None) -> np.ndarray:
    a = np.asarray(policy(obs), dtype=float).reshape(6)
    if np.any(np.abs(a) > 1.0):
        if counter is not None:
            counter.clamp_warnings += 1
        log.warning("policy action %s clamped to [-1, 1]", a.tolist())
        a = np.clip(a, -1.0, 1.0)
    return a


class ConstantPolicy:
    def __init__(self, action=None):
        self.action = np.zeros(6) if action is None else np.asarray(action, dtype=float)

    def __call__(self, obs):
        return self.action.copy()


class GreedyPolicy:
    """Greedy VIG planner behind the policy signature.

    The observation alone does not carry the 3D belief, so the adapter reads
    the current belief through ``belief_fn``.
    """

    def __init__(self, rng: np.random.Generator, cfg: ViewPlanningConfig, belief_fn: Callable[[], BeliefState] | None = None):
        self.belief_fn = belief_fn
        self.rng = rng
        self.cfg = cfg
        self.last: NBVResult | None = None

    def bind(self, belief_fn: Callable[[], BeliefState]) -> None:
        self.belief_fn = belief_fn

    def __call__(self, obs):
        self.last = greedy_nbv(self.belief_fn(), self.cfg.n_candidates, self.rng, self.cfg)
        return normalize_action(self.last.pose, self.cfg.boxes)


class ReplayPolicy:
    def __init__(self, actions):
        self.actions = [np.asarray(a, dtype=float) for a in actions]
        self.k = 0

    def __call__(self, obs):
        a = self.actions[self.k]
        self.k += 1
        return a


# -- RL environment contract ---------------------------------------------------


class NBVEnv:
    """View-only environment with the observation/reward contract of the NBV agent."""

    def __init__(self, scene: Scene, grid: GridSpec, boxes: ActionBoxes, camera: CameraModel = CameraModel(), reward: RewardConfig = RewardConfig(), theta_occ: float = 0.87, weight: float = 6.0, n_classes: int = 12, n_hist: int = 4, budget: int = 40):
        self.scene = scene
        self.grid = grid
        self.boxes = boxes
        self.camera = camera
        self.reward_cfg = reward
        self.theta_occ = theta_occ
        self.weight = weight
        self.n_classes = n_classes
        self.n_hist = n_hist
        self.budget = budget
        self.reset()

    def reset(self) -> EnrichedObservation:
        self.gt = ground_truth_maps(self.scene, self.grid)
        self.belief = BeliefState.prior(self.grid, self.n_classes)
        self.history = ViewHistory(self.n_hist)
        self.steps = 0
        return encode_observation(self.belief, self.history, self.theta_occ)

    def step(self, action) -> tuple[EnrichedObservation, float, bool, dict]:
        self.steps += 1
        done = self.steps >= self.budget
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        pose = denormalize_action(a, self.boxes)
        obs_now = encode_observation(self.belief, self.history, self.theta_occ)
        if not feasibility(pose, self.scene, self.boxes, self.grid, self.theta_occ, blocked=self.gt[0]):
            r = step_reward(False, cfg=self.reward_cfg)
            return obs_now.zeros_like(), r, done, {"feasible": False}
        before = self.belief
        o = render_view(self.scene, pose, self.camera, self.grid, gt=self.gt)
        self.belief = integrate_observation(before, o, self.weight)
        r_unc = uncertainty_reward(before, self.belief)
        r_rep = repeat_penalty(pose, self.history, self.reward_cfg)
        self.history.push(HistoryEntry(pose, a, normalized_height_map(self.belief, self.theta_occ)))
        r = step_reward(True, r_unc, r_rep, self.reward_cfg)
        obs = encode_observation(self.belief, self.history, self.theta_occ)
        return obs, r, done, {"feasible": True, "r_uncertainty": r_unc, "r_repeat": r_rep}


__all__ = [
    "ActionBoxes",
    "ActionRangeError",
    "ConstantPolicy",
    "EnrichedObservation",
    "GreedyPolicy",
    "HistoryEntry",
    "NBVEnv",
    "NBVResult",
    "Observation",
    "PlanningError",
    "PlanningMaps",
    "PolicyAdapter",
    "ReplayPolicy",
    "RewardConfig",
    "ViewHistory",
    "ViewPlanningConfig",
    "denormalize_action",
    "encode_observation",
    "evaluate_external_policy",
    "expected_vig",
    "feasibility",
    "greedy_nbv",
    "normalize_action",
    "planning_maps",
    "repeat_penalty",
    "step_reward",
    "uncertainty_reward",
    "vig_of_poses",
]
