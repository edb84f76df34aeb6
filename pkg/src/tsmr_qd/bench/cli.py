"""Command line entry point: ``tsmr-qd {run,report,project,heatmap,replay}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..evolvers import ALGORITHMS
from . import analysis
from .config import ExperimentConfig, preset
from .runner import ExperimentError, run_experiment


def _build_config(args):
    if args.config:
        d = json.loads(Path(args.config).read_text())
        if args.preset:
            d["preset"] = args.preset
        cfg = ExperimentConfig.from_dict(d)
    else:
        cfg = preset(args.preset or "paper")
    over = {}
    if args.task:
        over["task"] = args.task
    if args.algo:
        over["algorithms"] = tuple(args.algo)
    if args.runs is not None:
        over["runs"] = args.runs
    if args.seed is not None:
        over["seed"] = args.seed
    return replace(cfg, **over)


def cmd_run(args) -> int:
    cfg = _build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"config_{cfg.task}.json").write_text(cfg.to_json())

    def progress(algo, run, entry):
        if entry["generation"] % args.log_every == 0:
            logging.info("%s run %d gen %d evals %d best %.2f cm", algo, run, entry["generation"],
                         entry["evaluations"], entry["best_fs_cm"])

    try:
        dirs = run_experiment(cfg, out, resume=not args.no_resume, progress=None if args.workers > 1 else progress,
                              workers=args.workers)
    except ExperimentError as exc:
        for d, err in exc.failures:
            print(f"error: run {d} failed: {err}", file=sys.stderr)
        return 1
    for d in dirs:
        print(d)
    return 0


def cmd_report(args) -> int:
    summary = analysis.report(args.out, args.dest, task=args.task, images=not args.no_images)
    for algo, stats in summary["algorithms"].items():
        line = ", ".join(f"{m} {stats[m]['mean']:.2f} +- {stats[m]['std']:.2f}" for m in analysis.METRICS)
        print(f"{algo} (n={stats['best_fs_cm']['n']}): {line}")
    for c in summary["comparisons"]:
        print(f"{c['metric']}: {c['a']} vs {c['b']} p={c['p_value']:.6f} ({c['method']})")
    for a in summary["artifacts"]:
        print(a)
    return 0


def cmd_project(args) -> int:
    p = analysis.project_double_to_single(args.run)
    print(json.dumps({"occupied": len(p.archive), "clamped": p.clamped, "max_fitness_error": p.max_fitness_error}))
    return 0


def cmd_heatmap(args) -> int:
    m = analysis.heatmap(args.run, args.archive, args.dest)
    with np.printoptions(precision=1, suppress=True, linewidth=160, nanstr="  .  "):
        print(m)
    return 0


def cmd_replay(args) -> int:
    cell = tuple(int(v) for v in args.cell.split(",")) if args.cell else None
    print(json.dumps(analysis.replay(args.run, args.archive, cell, args.dest), indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsmr-qd", description="Quality-diversity co-design of tensegrity modular robots")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run experiments")
    r.add_argument("--config", help="JSON configuration (keys override its 'preset')")
    r.add_argument("--preset", choices=["paper", "desk"])
    r.add_argument("--task", choices=["goal", "squeeze"])
    r.add_argument("--algo", action="append", choices=sorted(ALGORITHMS),
                   help="algorithm to run; repeat for several (default: all)")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="results")
    r.add_argument("--no-resume", action="store_true", help="rerun runs that already finished")
    r.add_argument("--log-every", type=int, default=10)
    r.add_argument("--workers", type=int, default=1, help="run this many runs in parallel processes")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="summarize finished runs")
    s.add_argument("--out", default="results")
    s.add_argument("--dest")
    s.add_argument("--task", choices=["goal", "squeeze"], help="required when --out holds both tasks")
    s.add_argument("--no-images", action="store_true", help="skip PNG output")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("project", help="project a dual-archive run onto a single 4-D archive")
    s.add_argument("--run", required=True)
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("heatmap", help="write and print an archive heatmap")
    s.add_argument("--run", required=True)
    s.add_argument("--archive", default="morphology")
    s.add_argument("--dest")
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("replay", help="re-simulate a stored solution")
    s.add_argument("--run", required=True)
    s.add_argument("--archive", default="morphology")
    s.add_argument("--cell", help="comma-separated cell index (default: best)")
    s.add_argument("--dest")
    s.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "run" else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
