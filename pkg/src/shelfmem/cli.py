"""Command line entry point: generate scenes, run and compare planners, replay logs.

Exit codes: 0 ok, 1 config error, 2 run failure, 3 replay mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import CONFIG_ENV, ConfigError, ExperimentConfig, load_config
from .metrics import METHODS, aggregate_batch, comparison_from_logs, REPORT_COLUMNS
from .pgm import write_pgm
from .planner import EpisodeLog, final_world, replay, run_batch
from .push import footprint_occupancy, normalized_uo, uncertainty_distance_map
from .scene import Scene, SceneGenerationError, load_scene, save_scene

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_REPLAY = 0, 1, 2, 3


class RunFailure(RuntimeError):
    pass


def scene_filename(seed: int) -> str:
    return f"scene_{seed:05d}.json"


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise RunFailure(f"cannot create output directory {out}: {e.strerror or e}") from e
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as e:
        raise RunFailure(f"cannot write {path}: {e.strerror or e}") from e


def _scenes(args, cfg: ExperimentConfig) -> tuple[list[Scene], list[str]]:
    """Scenes from ``--scenes`` if given, else generated from the config."""
    scenes, failures = [], []
    if getattr(args, "scenes", None):
        files = sorted(Path(args.scenes).glob("scene_*.json"))
        if not files:
            raise RunFailure(f"no scene_*.json files in {args.scenes}")
        for f in files:
            try:
                scenes.append(load_scene(f))
            except (OSError, ValueError, KeyError) as e:
                failures.append(f"{f}: {e}")
        return scenes, failures
    for seed in cfg.scene_seeds(args.seed_offset):
        try:
            scenes.append(cfg.make_scene(seed))
        except SceneGenerationError as e:
            failures.append(str(e))
    return scenes, failures


def _dump_maps(log: EpisodeLog, stem: Path) -> None:
    world = final_world(log)
    b = world.belief
    cfg = world.cfg
    u_s = b.semantic_uncertainty()
    u_o = normalized_uo(b)
    write_pgm(stem.with_name(stem.name + "_occupancy.pgm"), footprint_occupancy(b), 0.0, 1.0)
    write_pgm(stem.with_name(stem.name + "_labels.pgm"), b.hard_labels(), 0, cfg.n_classes - 1)
    write_pgm(stem.with_name(stem.name + "_us.pgm"), u_s, 0.0, 1.0)
    write_pgm(stem.with_name(stem.name + "_distance.pgm"), uncertainty_distance_map(u_s, u_o, cfg.push))


def _run_method(cfg: ExperimentConfig, method: str, scenes: list[Scene], out: Path, workers: int) -> list[EpisodeLog]:
    logs = run_batch(scenes, cfg.planner_config(method), cfg.planner_seed, workers)
    d = out / method
    d.mkdir(parents=True, exist_ok=True)
    for lg in logs:
        stem = d / f"episode_{lg.header['scene_seed']:05d}"
        lg.save(stem.with_suffix(".jsonl"))
        if cfg.output.pgm_maps and lg.steps:
            _dump_maps(lg, stem)
    return logs


def cmd_generate(args, cfg: ExperimentConfig) -> int:
    out = _out_dir(args, cfg)
    failed = []
    for seed in cfg.scene_seeds(args.seed_offset):
        try:
            scene = cfg.make_scene(seed)
        except SceneGenerationError as e:
            failed.append(str(e))
            continue
        path = out / scene_filename(seed)
        try:
            save_scene(scene, path)
        except OSError as e:
            raise RunFailure(f"cannot write {path}: {e.strerror or e}") from e
    n = cfg.scenes.n_scenes - len(failed)
    print(f"wrote {n} scene files to {out}")
    for f in failed:
        print(f"failed: {f}", file=sys.stderr)
    return EXIT_RUN if failed else EXIT_OK


def cmd_run(args, cfg: ExperimentConfig) -> int:
    method = args.method[0] if args.method else cfg.method
    if len(args.method or []) > 1:
        raise ConfigError("run takes a single --method; use compare for several")
    out = _out_dir(args, cfg)
    scenes, failures = _scenes(args, cfg)
    logs = _run_method(cfg, method, scenes, out, args.workers or cfg.workers)
    metrics = aggregate_batch(logs, method) if logs else None
    failures += metrics.failures if metrics else []
    report = {"method": method, "n_scenes": len(logs), "failures": failures, "metrics": metrics.row() if metrics else None}
    _write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    lines = [",".join(REPORT_COLUMNS)]
    if metrics:
        lines.append(",".join(str(v) for v in metrics.row().values()))
    _write(out / "metrics.csv", "\n".join(lines) + "\n")
    print(f"{method}: {len(logs)} episodes, {len(failures)} failures; outputs in {out}")
    for f in failures:
        print(f"failed: {f}", file=sys.stderr)
    return EXIT_RUN if failures or not logs else EXIT_OK


def cmd_compare(args, cfg: ExperimentConfig) -> int:
    methods = args.method or cfg.methods
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"methods: unknown {bad}")
    if len(methods) < 2:
        raise ConfigError("methods: compare needs at least two methods")
    out = _out_dir(args, cfg)
    scenes, failures = _scenes(args, cfg)
    if not scenes:
        raise RunFailure("no scenes to compare on")
    by_method = {m: _run_method(cfg, m, scenes, out, args.workers or cfg.workers) for m in methods}
    report = comparison_from_logs(by_method)
    _write(out / "comparison.json", report.to_json())
    _write(out / "comparison.csv", report.to_csv())
    for r in report.rows:
        failures += r.failures
    print(report.to_csv(), end="")
    for f in failures:
        print(f"failed: {f}", file=sys.stderr)
    return EXIT_RUN if failures else EXIT_OK


def cmd_replay(args, cfg: ExperimentConfig | None) -> int:
    try:
        log = EpisodeLog.load(args.log)
    except (OSError, ValueError, KeyError) as e:
        raise RunFailure(f"cannot read log {args.log}: {e}") from e
    scene = None
    if args.scene:
        try:
            scene = load_scene(args.scene)
        except (OSError, ValueError, KeyError) as e:
            raise RunFailure(f"cannot read scene {args.scene}: {e}") from e
    res = replay(log, scene)
    if res.ok:
        print(f"replay ok: {res.steps_checked} steps match")
        return EXIT_OK
    print(f"replay mismatch: {res.detail}", file=sys.stderr)
    return EXIT_REPLAY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shelfmem", description="Manipulation-enhanced shelf mapping experiments.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help=f"experiment config JSON (default: ${CONFIG_ENV}, else built-in defaults)")
        if out:
            sp.add_argument("--out", help="output directory (default: output.out_dir from the config)")
        sp.add_argument("--seed-offset", type=int, default=0, help="added to every scene seed")

    g = sub.add_parser("generate", help="write one scene file per seed")
    common(g)
    for name, helptext in (("run", "run one method over a scene batch"), ("compare", "run several methods on the same scenes")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--scenes", help="directory of scene_*.json files (default: generate from the config)")
        sp.add_argument("--workers", type=int, help="parallel worker processes")
        sp.add_argument("--method", action="append", choices=METHODS, help="method to run (repeat for compare)")
    r = sub.add_parser("replay", help="re-execute a log and check every step")
    r.add_argument("log")
    r.add_argument("--scene", help="scene file that must match the one stored in the log")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "replay":
            return cmd_replay(args, None)
        cfg = load_config(args.config)
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("workers: must be at least 1")
        return {"generate": cmd_generate, "run": cmd_run, "compare": cmd_compare}[args.verb](args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
