"""Evaluation metrics, batch aggregation and method comparison."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState, ContractError

METHODS = ("informed-push", "random-push", "view-only", "random-view")


def miou(pred: np.ndarray, gt: np.ndarray, classes=None) -> float:
    """Mean per-class IoU over classes present in either map (or the given ``classes``)."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ContractError(f"shape mismatch {pred.shape} vs {gt.shape}")
    present = np.union1d(np.unique(pred), np.unique(gt))
    if classes is not None:
        present = np.intersect1d(present, np.asarray(list(classes)))
    if len(present) == 0:
        return 1.0
    ious = []
    for c in present:
        p = pred == c
        g = gt == c
        union = np.count_nonzero(p | g)
        ious.append(np.count_nonzero(p & g) / union)
    return float(np.mean(ious))


def occupancy_miou(b: BeliefState, gt_occ: np.ndarray, theta_occ: float = 0.87) -> float:
    if gt_occ.shape != b.grid.shape:
        raise ContractError("belief and ground truth grids differ")
    pred = b.occupancy_mean() >= theta_occ
    return miou(pred.astype(np.int8), gt_occ.astype(np.int8), classes=(0, 1))


def semantic_miou(b: BeliefState, gt_sem: np.ndarray) -> float:
    return miou(b.hard_labels(), gt_sem)


@dataclass
class Stat:
    mean: float
    std: float

    def fmt(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f} ± {self.std:.{digits}f}"


def _stat(xs) -> Stat:
    xs = [float(x) for x in xs]
    return Stat(float(np.mean(xs)), float(np.std(xs)))


@dataclass
class RunMetrics:
    method: str
    n_scenes: int
    occ_miou: Stat
    sem_miou: Stat
    mad: Stat
    num_push: Stat
    collision_rate: Stat
    view_time_median: float
    push_time_median: float
    seeds: list[int] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def row(self) -> dict:
        return {
            "method": self.method,
            "n_scenes": self.n_scenes,
            "occ_miou_mean": self.occ_miou.mean,
            "occ_miou_std": self.occ_miou.std,
            "sem_miou_mean": self.sem_miou.mean,
            "sem_miou_std": self.sem_miou.std,
            "mad_mean": self.mad.mean,
            "mad_std": self.mad.std,
            "num_push_mean": self.num_push.mean,
            "num_push_std": self.num_push.std,
            "collision_rate": self.collision_rate.mean,
            "view_time_median_s": self.view_time_median,
            "push_time_median_s": self.push_time_median,
        }


REPORT_COLUMNS = list(RunMetrics("", 0, *[Stat(0, 0)] * 5, 0.0, 0.0).row())


def scene_summary(log) -> dict:
    """Per-episode finals used for aggregation."""
    pushes = [s for s in log.steps if s["kind"] == "push"]
    collided = any(s["outcome"]["secondary_contacts"] > 0 or s["outcome"]["fallen"] for s in pushes)
    final = log.steps[-1]["metrics"] if log.steps else {"occ_miou": 0.0, "sem_miou": 0.0}
    return {
        "occ_miou": final["occ_miou"],
        "sem_miou": final["sem_miou"],
        "mad": sum(s["outcome"]["total_displacement"] for s in pushes),
        "num_push": len(pushes),
        "collision": 1.0 if collided else 0.0,
    }


def _median(xs) -> float:
    return float(statistics.median(xs)) if xs else float("nan")


def aggregate_batch(logs, method: str | None = None) -> RunMetrics:
    if not logs:
        raise ValueError("aggregate_batch needs at least one log")
    rows = [scene_summary(lg) for lg in logs]
    vt = [t["view_s"] for lg in logs for t in lg.timings if t.get("view_s") is not None]
    pt = [t["push_s"] for lg in logs for t in lg.timings if t.get("push_s") is not None]
    return RunMetrics(
        method=method or logs[0].header.get("method", ""),
        n_scenes=len(logs),
        occ_miou=_stat(r["occ_miou"] for r in rows),
        sem_miou=_stat(r["sem_miou"] for r in rows),
        mad=_stat(r["mad"] for r in rows),
        num_push=_stat(r["num_push"] for r in rows),
        collision_rate=_stat(r["collision"] for r in rows),
        view_time_median=_median(vt),
        push_time_median=_median(pt),
        seeds=[lg.header.get("scene_seed") for lg in logs],
        failures=[f"scene {lg.header.get('scene_seed')}: {lg.end.get('error', 'error')}" for lg in logs if lg.end.get("reason") == "error"],
    )


@dataclass
class ComparisonReport:
    rows: list[RunMetrics]
    seeds: list[int]
    deltas: dict[str, dict[str, float]]
    per_scene: dict[str, list[dict]] = field(default_factory=dict)

    note = "collision_rate counts a scene as colliding if any push caused secondary contact or a fall"

    def to_json(self) -> str:
        d = {
            "note": self.note,
            "seeds": self.seeds,
            "rows": [r.row() | {"failures": r.failures} for r in self.rows],
            "deltas": self.deltas,
            "per_scene": self.per_scene,
        }
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {self.note}\n")
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.row())
        return buf.getvalue()


def comparison_from_logs(by_method: dict[str, list]) -> ComparisonReport:
    methods = list(by_method)
    seed_lists = {m: [lg.header["scene_seed"] for lg in by_method[m]] for m in methods}
    ref = seed_lists[methods[0]]
    for m in methods[1:]:
        if seed_lists[m] != ref:
            raise ValueError(f"method {m} ran on different scene seeds than {methods[0]}")
    rows = [aggregate_batch(by_method[m], m) for m in methods]
    base = rows[0].row()
    deltas = {}
    for r in rows[1:]:
        rr = r.row()
        deltas[r.method] = {k: rr[k] - base[k] for k in base if k.endswith("_mean") or k == "collision_rate"}
    per_scene = {m: [scene_summary(lg) | {"seed": lg.header["scene_seed"]} for lg in by_method[m]] for m in methods}
    return ComparisonReport(rows, list(ref), deltas, per_scene)


def compare_methods(scenes, methods, planner_cfg, planner_seed: int = 0, workers: int = 1) -> ComparisonReport:
    """Run every method on the same scenes and compare.

    ``scenes`` is a list of ``Scene``; ``planner_cfg`` a ``PlannerConfig``
    whose ``method`` field is overridden per method.
    """
    from .planner import run_batch

    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}")
    by_method = {m: run_batch(scenes, planner_cfg.with_method(m), planner_seed, workers) for m in methods}
    return comparison_from_logs(by_method)


__all__ = [
    "METHODS",
    "ComparisonReport",
    "RunMetrics",
    "Stat",
    "aggregate_batch",
    "compare_methods",
    "comparison_from_logs",
    "miou",
    "occupancy_miou",
    "scene_summary",
    "semantic_miou",
]
