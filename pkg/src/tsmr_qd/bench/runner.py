"""Run experiments and write one self-describing directory per run.

Layout::

    <out>/<task>/<algorithm>/run_<k>/
        manifest.json   settings, seed, counts, timing; written when the run
                        starts and finalized (complete/failed) when it ends
        log.jsonl       one JSON object per generation
        trace.json      feature-descriptor operations (archive-based algorithms)
        events.json     NEAT species removals and restarts
        projector.json  final controller-descriptor mapping, if any
        best.json       best solution found
        archives/       one CSV per archive plus controller genomes
"""
from __future__ import annotations

import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from ..evolvers import RunResult, run_algorithm
from ..qd import export_archive
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def run_seeds(master_seed: int, runs: int) -> list[int]:
    """Per-run seeds, shared by all algorithms of an experiment."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(runs)]


def run_dir(out, task: str, algorithm: str, run: int) -> Path:
    return Path(out) / task / algorithm / f"run_{run:02d}"


def _package_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def write_run(result: RunResult, directory, config: ExperimentConfig, run: int, seed: int,
              wall_time: float | None = None) -> Path:
    d = Path(directory)
    (d / "archives").mkdir(parents=True, exist_ok=True)
    d0 = config.task_spec().initial_distance
    for name, archive in result.archives.items():
        export_archive(archive, d / "archives", d0, filename=f"{name}.csv")
    with open(d / "log.jsonl", "w") as fh:
        for row in result.log:
            fh.write(json.dumps(row) + "\n")
    (d / "trace.json").write_text(json.dumps(result.trace, indent=1))
    (d / "events.json").write_text(json.dumps(result.events, indent=1))
    if result.projector is not None:
        (d / "projector.json").write_text(json.dumps(result.projector.to_dict()))
    if result.best is not None:
        b = result.best
        (d / "best.json").write_text(json.dumps({
            "fitness_m": b.fitness, "fitness_cm": (d0 - b.fitness) * 100.0, "solution_id": b.id,
            "morphology": b.morphology.to_record(), "controller": json.loads(b.controller.to_record()),
        }, indent=1, sort_keys=True))
    manifest = _read_manifest(d) or _start_manifest(d, config, result.algorithm, run, seed)
    manifest.update({
        "evaluations": result.evaluations, "generations": len(result.log),
        "archives": {k: f"archives/{k}.csv" for k in result.archives},
        "complete": True, "failed": False,
    })
    manifest["timestamps"].update({"finished": _now(), "wall_time_s": wall_time})
    _write_manifest(d, manifest)
    return d


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S")


def _read_manifest(d: Path) -> dict | None:
    m = d / "manifest.json"
    return json.loads(m.read_text()) if m.exists() else None


def _write_manifest(d: Path, manifest: dict):
    d.mkdir(parents=True, exist_ok=True)
    tmp = d / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    tmp.replace(d / "manifest.json")


def _start_manifest(d: Path, config: ExperimentConfig, algorithm: str, run: int, seed: int) -> dict:
    manifest = {
        "algorithm": algorithm, "task": config.task, "run": run, "seed": seed,
        "config": config.to_dict(), "package_version": _package_version(),
        "complete": False, "failed": False, "timestamps": {"started": _now()},
    }
    _write_manifest(d, manifest)
    return manifest


def _execute(config: ExperimentConfig, algo: str, k: int, seed: int, d: Path, evaluate_fn=None,
             progress=None) -> tuple[Path, str | None]:
    """Run one (algorithm, run) pair; failures are recorded in its manifest instead of raised."""
    manifest = _start_manifest(d, config, algo, k, seed)
    t0 = time.perf_counter()
    try:
        cb = (lambda e: progress(algo, k, e)) if progress else None
        result = run_algorithm(algo, config.task_spec(), config.evolver(), seed, config.sim, evaluate_fn, cb)
        write_run(result, d, config, k, seed, time.perf_counter() - t0)
        return d, None
    except Exception as exc:  # noqa: BLE001 - one bad run must not stop the others
        manifest.update({"failed": True, "error": f"{type(exc).__name__}: {exc}",
                         "traceback": traceback.format_exc()})
        manifest["timestamps"]["failed"] = _now()
        _write_manifest(d, manifest)
        return d, manifest["error"]


class ExperimentError(RuntimeError):
    """Raised after all runs finished when at least one of them failed."""

    def __init__(self, failures: list[tuple[Path, str]]):
        self.failures = failures
        super().__init__("; ".join(f"{d}: {e}" for d, e in failures))


def run_experiment(config: ExperimentConfig, out, algorithms=None, resume: bool = True, evaluate_fn=None,
                   progress=None, workers: int = 1) -> list[Path]:
    """Run every (algorithm, run) pair and write its directory; returns the run directories.

    With ``resume`` a run whose manifest is complete and records the same
    configuration is skipped.  A failing run is flagged in its manifest and the remaining runs carry on;
    :class:`ExperimentError` is raised at the end if any failed.  With
    ``workers > 1`` runs execute in separate processes (``evaluate_fn`` and
    ``progress`` must then be picklable).
    """
    algorithms = tuple(algorithms or config.algorithms)
    seeds = run_seeds(config.seed, config.runs)
    jobs = []
    dirs = []
    for algo in algorithms:
        for k, seed in enumerate(seeds):
            d = run_dir(out, config.task, algo, k)
            dirs.append(d)
            m = _read_manifest(d)
            if resume and m is not None and m.get("complete") and m.get("config") == config.to_dict():
                log.info("skipping finished run %s", d)
                continue
            jobs.append((algo, k, seed, d))
    failures = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_execute, config, a, k, s, d, evaluate_fn, progress) for a, k, s, d in jobs]
            outcomes = [f.result() for f in futs]
    else:
        outcomes = []
        for algo, k, seed, d in jobs:
            log.info("running %s on %s, run %d (seed %d)", algo, config.task, k, seed)
            outcomes.append(_execute(config, algo, k, seed, d, evaluate_fn, progress))
    for d, err in outcomes:
        if err is not None:
            log.error("run %s failed: %s", d, err)
            failures.append((d, err))
    if failures:
        raise ExperimentError(failures)
    return dirs
