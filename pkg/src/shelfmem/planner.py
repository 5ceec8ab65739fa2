"""Manipulation-enhanced mapping loop: view or push, execute, update, repeat."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import PushCandidate, ViewPose
from .belief import BeliefState, GridSpec
from .metrics import occupancy_miou, semantic_miou
from .push import PushConfig, propose_push, push_forward_belief
from .scene import PushOutcome, PushPhysics, PushPreconditionError, Scene, apply_push, ground_truth_maps
from .sensor import CameraModel, Observation, integrate_observation, render_view
from .views import (
    ActionBoxes,
    HistoryEntry,
    PlanningError,
    PolicyAdapter,
    RewardConfig,
    ViewHistory,
    ViewPlanningConfig,
    denormalize_action,
    encode_observation,
    feasibility,
    greedy_nbv,
    normalize_action,
    normalized_height_map,
    planning_maps,
    repeat_penalty,
    sample_view_candidates,
    step_reward,
    uncertainty_reward,
    vig_of_poses,
)

LOG_VERSION = 1
PUSH_METHODS = {"informed-push": "informed", "random-push": "random"}


@dataclass(frozen=True)
class PlannerConfig:
    grid: GridSpec = GridSpec()
    view: ViewPlanningConfig = ViewPlanningConfig(ActionBoxes.for_grid(GridSpec()))
    push: PushConfig = PushConfig()
    camera: CameraModel = CameraModel()
    reward: RewardConfig = RewardConfig()
    physics: PushPhysics = PushPhysics()
    delta_view: float = 2.0
    budget: int = 40
    completion_certainty: float = 0.99
    tof_enabled: bool = False
    method: str = "informed-push"
    occ_weight: float = 6.0
    sem_weight: float = 120.0
    occ_cap: float = 60.0
    sem_cap: float = 360.0
    occ_certainty_floor: float = 0.02
    n_hist: int = 4
    n_classes: int = 12

    def __post_init__(self):
        if self.delta_view < 1:
            raise ValueError("delta_view must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0 < self.completion_certainty < 1:
            raise ValueError("completion_certainty must lie in (0, 1)")
        if self.method not in ("informed-push", "random-push", "view-only", "random-view"):
            raise ValueError(f"unknown method {self.method!r}")

    def with_method(self, method: str) -> "PlannerConfig":
        return dataclasses.replace(self, method=method)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        d = dict(d)
        g = dict(d.pop("grid"))
        grid = GridSpec(**{**g, "origin": tuple(g["origin"])})
        v = dict(d.pop("view"))
        boxes = ActionBoxes(**{k: tuple(x) for k, x in v.pop("boxes").items()})
        camera_v = CameraModel(**v.pop("camera"))
        view = ViewPlanningConfig(boxes=boxes, camera=camera_v, **v)
        p = dict(d.pop("push"))
        p["start_offset_cells"] = tuple(p["start_offset_cells"])
        return cls(
            grid=grid,
            view=view,
            push=PushConfig(**p),
            camera=CameraModel(**d.pop("camera")),
            reward=RewardConfig(**d.pop("reward")),
            physics=PushPhysics(**d.pop("physics")),
            **d,
        )


# -- certainty and arbitration ------------------------------------------------


def map_certainty(b: BeliefState, sem_floor: float = 0.1, occ_floor: float = 0.02) -> float:
    """Fraction of footprint cells confident in both channels.

    A cell counts when its u_s is below ``sem_floor`` and the column-mean
    occupancy variance is below ``occ_floor``.
    """
    us = b.semantic_uncertainty()
    uo = b.occupancy_variance().mean(axis=2)
    return float(np.mean((us < sem_floor) & (uo < occ_floor)))


@dataclass
class Decision:
    kind: str  # "view" | "push"
    view: ViewPose
    vig_nbv: float
    push: PushCandidate | None = None
    vig_push: float | None = None
    telemetry: dict = field(default_factory=dict)
    view_s: float = 0.0
    push_s: float | None = None


def arbitrate(vig_nbv: float, vig_push: float | None, delta_view: float) -> str:
    if vig_push is None:
        return "view"
    return "view" if vig_nbv * delta_view > vig_push else "push"


def select_action(b: BeliefState, h: ViewHistory, cfg: PlannerConfig, rng: np.random.Generator, allow_push: bool = True, policy: PolicyAdapter | None = None, push_rng: np.random.Generator | None = None) -> Decision:
    """Best view, then (for push methods) the best push, arbitrated by ``delta_view``.

    ``push_rng`` feeds the push sampler; keeping it apart from ``rng`` means a
    push method that never pushes picks exactly the views view-only would.
    """
    t0 = time.perf_counter()
    maps = planning_maps(b, cfg.view)
    tel: dict = {}
    if policy is not None:
        a = policy(encode_observation(b, h, cfg.view.theta_occ))
        pose = denormalize_action(a, cfg.view.boxes)
        vig = float(vig_of_poses(maps, [pose], cfg.view.camera)[0])
    elif cfg.method == "random-view":
        poses = sample_view_candidates(maps, 1, rng, dataclasses.replace(cfg.view, target_bias=0.0))
        if not poses:
            raise PlanningError("no feasible view candidate found")
        pose = poses[0]
        vig = float(vig_of_poses(maps, [pose], cfg.view.camera)[0])
    else:
        r = greedy_nbv(maps, cfg.view.n_candidates, rng, cfg.view)
        pose, vig = r.pose, r.vig
        tel["view_candidates"] = len(r.candidate_vigs)
    view_s = time.perf_counter() - t0
    dec = Decision("view", pose, vig, telemetry=tel, view_s=view_s)
    if not allow_push or cfg.method not in PUSH_METHODS:
        return dec
    certainty = map_certainty(b, cfg.push.sem_uncertainty_floor, cfg.occ_certainty_floor)
    if certainty >= cfg.completion_certainty:
        return dec
    t1 = time.perf_counter()
    prop = propose_push(b, cfg.view, cfg.push, push_rng if push_rng is not None else rng, PUSH_METHODS[cfg.method], base=maps)
    dec.push_s = time.perf_counter() - t1
    dec.telemetry.update(prop.telemetry)
    if prop.best is None:
        return dec
    dec.push = prop.best
    dec.vig_push = prop.best.predicted_vig
    dec.kind = arbitrate(vig, dec.vig_push, cfg.delta_view)
    return dec


# -- episode log --------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class EpisodeLog:
    header: dict
    steps: list[dict] = field(default_factory=list)
    end: dict = field(default_factory=dict)
    timings: list[dict] = field(default_factory=list)  # kept out of the JSONL so logs are reproducible

    @property
    def reason(self) -> str:
        return self.end.get("reason", "")

    def to_jsonl(self) -> str:
        lines = [_dumps({"type": "header", **self.header})]
        lines += [_dumps({"type": "step", **s}) for s in self.steps]
        lines.append(_dumps({"type": "end", **self.end}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeLog":
        header: dict = {}
        steps: list[dict] = []
        end: dict = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "header":
                header = rec
            elif kind == "step":
                steps.append(rec)
            elif kind == "end":
                end = rec
        return cls(header, steps, end)

    def save(self, path: str | Path, timings: bool = True) -> None:
        path = Path(path)
        path.write_text(self.to_jsonl())
        if timings:
            path.with_suffix(".timing.json").write_text(json.dumps(self.timings, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeLog":
        path = Path(path)
        log = cls.from_jsonl(path.read_text())
        tp = path.with_suffix(".timing.json")
        if tp.exists():
            log.timings = json.loads(tp.read_text())
        return log

    def scene(self) -> Scene:
        return Scene.from_dict(self.header["scene"])

    def config(self) -> PlannerConfig:
        return PlannerConfig.from_dict(self.header["config"])


# -- execution ----------------------------------------------------------------


@dataclass
class World:
    """Simulation state shared by the live loop and replay."""

    scene: Scene
    belief: BeliefState
    cfg: PlannerConfig
    history: ViewHistory
    gt: tuple = ()

    def __post_init__(self):
        self.gt = ground_truth_maps(self.scene, self.cfg.grid)

    def metrics(self) -> dict:
        return {
            "occ_miou": occupancy_miou(self.belief, self.gt[0], self.cfg.view.theta_occ),
            "sem_miou": semantic_miou(self.belief, self.gt[1]),
            "certainty": map_certainty(self.belief, self.cfg.push.sem_uncertainty_floor, self.cfg.occ_certainty_floor),
        }

    def execute_view(self, pose: ViewPose) -> dict:
        cfg = self.cfg
        feasible = feasibility(pose, self.scene, cfg.view.boxes, cfg.grid, cfg.view.theta_occ, blocked=self.gt[0])
        before = self.belief
        if feasible:
            obs = render_view(self.scene, pose, cfg.camera, cfg.grid, gt=self.gt)
        else:
            obs = Observation.empty(cfg.camera.nx * cfg.camera.ny, cfg.grid, cfg.camera.max_range)
        self.belief = integrate_observation(before, obs, cfg.occ_weight, semantic_weight=cfg.sem_weight, occ_cap=cfg.occ_cap, sem_cap=cfg.sem_cap)
        r_unc = uncertainty_reward(before, self.belief)
        r_rep = repeat_penalty(pose, self.history, cfg.reward)
        action = np.clip(normalize_action(pose, cfg.view.boxes), -1.0, 1.0)
        self.history.push(HistoryEntry(pose, action, normalized_height_map(self.belief, cfg.view.theta_occ)))
        return {
            "feasible": feasible,
            "r_uncertainty": r_unc,
            "r_repeat": r_rep,
            "reward": step_reward(feasible, r_unc, r_rep, cfg.reward),
        }

    def execute_push(self, p: PushCandidate) -> tuple[PushOutcome, str | None]:
        err = None
        try:
            self.scene, outcome = apply_push(self.scene, p, self.cfg.physics)
        except PushPreconditionError as e:
            outcome, err = PushOutcome({}, target_id=None), str(e)
        self.gt = ground_truth_maps(self.scene, self.cfg.grid)
        # adopt the predicted belief and let the next observation correct it;
        # a pusher that met nothing felt no contact, so there is nothing to predict
        if outcome.target_id is not None:
            self.belief = push_forward_belief(self.belief, p, self.cfg.push)
        return outcome, err


def run_episode(scene: Scene, cfg: PlannerConfig = PlannerConfig(), seed: int = 0, policy=None, scene_seed: int | None = None) -> EpisodeLog:
    """Plan and execute until budget, certainty or (with ToF) a fall ends the episode."""
    rng, push_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    adapter = None if policy is None else (policy if isinstance(policy, PolicyAdapter) else PolicyAdapter(policy))
    world = World(scene, BeliefState.prior(cfg.grid, cfg.n_classes), cfg, ViewHistory(cfg.n_hist))
    log = EpisodeLog(
        header={
            "version": LOG_VERSION,
            "method": cfg.method,
            "scene_seed": scene.seed if scene_seed is None else scene_seed,
            "planner_seed": seed,
            "config": cfg.to_dict(),
            "scene": scene.to_dict(),
        }
    )
    if adapter is not None and hasattr(adapter.policy, "bind"):
        adapter.policy.bind(lambda: world.belief)
    reason = "budget"
    try:
        for step in range(cfg.budget):
            dec = select_action(world.belief, world.history, cfg, rng, allow_push=step > 0, policy=adapter, push_rng=push_rng)
            rec: dict = {"step": step, "kind": dec.kind, "vig_nbv": dec.vig_nbv, "vig_push": dec.vig_push, "view": dec.view.to_dict()}
            if dec.push is not None:
                rec["push"] = dec.push.to_dict()
            rec["telemetry"] = dec.telemetry
            if dec.kind == "view":
                rec.update(world.execute_view(dec.view))
            else:
                outcome, err = world.execute_push(dec.push)
                rec["outcome"] = outcome.to_dict()
                if err:
                    rec["push_error"] = err
            rec["metrics"] = world.metrics()
            log.steps.append(rec)
            log.timings.append({"step": step, "kind": dec.kind, "view_s": dec.view_s, "push_s": dec.push_s})
            if dec.kind == "push" and cfg.tof_enabled and rec["outcome"]["fallen"]:
                reason = "fall"
                break
            if rec["metrics"]["certainty"] >= cfg.completion_certainty:
                reason = "certainty"
                break
    except (PlanningError, ValueError) as e:
        reason = "error"
        log.end["error"] = f"{type(e).__name__}: {e}"
    log.end.update({"reason": reason, "steps": len(log.steps)})
    if adapter is not None:
        log.end["clamp_warnings"] = adapter.clamp_warnings
    return log


# -- replay -------------------------------------------------------------------


@dataclass
class ReplayResult:
    ok: bool
    steps_checked: int
    divergence_step: int | None = None
    detail: str = ""


def _close(a, b, tol: float) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_close(a[k], b[k], tol) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
        return abs(a - b) <= tol
    return a == b


def replay(log: EpisodeLog, scene: Scene | None = None, tol: float = 1e-9) -> ReplayResult:
    """Re-execute the logged actions and compare every step's metrics and push outcome."""
    logged_scene = log.scene()
    if scene is not None and scene.to_json() != logged_scene.to_json():
        return ReplayResult(False, 0, 0, "scene file does not match the scene stored in the log")
    cfg = log.config()
    world = World(logged_scene, BeliefState.prior(cfg.grid, cfg.n_classes), cfg, ViewHistory(cfg.n_hist))
    for n, rec in enumerate(log.steps):
        if rec["kind"] == "view":
            got = world.execute_view(ViewPose.from_dict(rec["view"]))
            checks = {k: got[k] for k in ("feasible", "r_uncertainty", "r_repeat", "reward")}
        else:
            outcome, _ = world.execute_push(PushCandidate.from_dict(rec["push"]))
            checks = {"outcome": outcome.to_dict()}
        checks["metrics"] = world.metrics()
        for k, v in checks.items():
            if not _close(v, rec.get(k), tol):
                return ReplayResult(False, n + 1, rec["step"], f"step {rec['step']}: {k} logged {rec.get(k)!r}, replayed {v!r}")
    return ReplayResult(True, len(log.steps))


# -- batches ------------------------------------------------------------------


def _run_one(args) -> EpisodeLog:
    scene, cfg, seed = args
    try:
        return run_episode(scene, cfg, seed)
    except Exception as e:  # one bad scene must not take the batch down
        header = {"version": LOG_VERSION, "method": cfg.method, "scene_seed": scene.seed, "planner_seed": seed, "config": cfg.to_dict(), "scene": scene.to_dict()}
        return EpisodeLog(header, [], {"reason": "error", "steps": 0, "error": f"{type(e).__name__}: {e}"})


def final_world(log: EpisodeLog) -> World:
    """Re-execute a log's actions and return the resulting world state."""
    cfg = log.config()
    world = World(log.scene(), BeliefState.prior(cfg.grid, cfg.n_classes), cfg, ViewHistory(cfg.n_hist))
    for rec in log.steps:
        if rec["kind"] == "view":
            world.execute_view(ViewPose.from_dict(rec["view"]))
        else:
            world.execute_push(PushCandidate.from_dict(rec["push"]))
    return world


def run_batch(scenes, cfg: PlannerConfig, planner_seed: int = 0, workers: int = 1) -> list[EpisodeLog]:
    """One episode per scene; the planner seed is offset by the scene's seed so pairs match across methods."""
    jobs = [(s, cfg, planner_seed + s.seed) for s in scenes]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    import multiprocessing as mp

    with mp.get_context("spawn").Pool(workers) as pool:
        return pool.map(_run_one, jobs)


__all__ = [
    "Decision",
    "EpisodeLog",
    "PlannerConfig",
    "ReplayResult",
    "World",
    "arbitrate",
    "final_world",
    "map_certainty",
    "replay",
    "run_batch",
    "run_episode",
    "select_action",
]
