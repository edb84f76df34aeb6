"""Post-processing of finished runs: summary statistics, curves, heatmaps,
double-to-single archive projection and replay of stored solutions."""
from __future__ import annotations

import csv
import itertools
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autofd import FeatureProjector
from ..evolvers import MORPH_DIMS
from ..physics import evaluate, write_trajectory_csv
from ..qd import Archive, export_archive, fitness_heatmap, import_archive, write_heatmap_csv
from .config import ExperimentConfig
from .stats import describe, rank_sum

METRICS = ("best_fs_cm", "morph_qd_score", "morph_coverage")


@dataclass
class RunRecord:
    path: Path
    manifest: dict
    log: list[dict]

    @property
    def algorithm(self) -> str:
        return self.manifest["algorithm"]

    @property
    def config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.manifest["config"])

    def final(self, metric: str) -> float:
        return float(self.log[-1][metric])

    def archive(self, name: str = "morphology") -> Archive:
        dims = MORPH_DIMS if name == "morphology" else None
        if name == "controller":
            dims = tuple(self.manifest["config"]["controller_bins"])
        elif name == "me":
            dims = MORPH_DIMS + tuple(self.manifest["config"]["controller_bins"])
        return import_archive(self.path / "archives" / f"{name}.csv", dims, name)

    def projector(self) -> FeatureProjector:
        return FeatureProjector.from_dict(json.loads((self.path / "projector.json").read_text()))


def load_run(path) -> RunRecord:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    with open(path / "log.jsonl") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return RunRecord(path, manifest, rows)


def find_runs(out, task: str | None = None) -> list[RunRecord]:
    """Completed runs under ``out`` (optionally only those of ``task``)."""
    runs = []
    for m in sorted(Path(out).glob("**/manifest.json")):
        manifest = json.loads(m.read_text())
        if manifest.get("complete") and (task is None or manifest["task"] == task):
            runs.append(load_run(m.parent))
    return runs


def _plot_curves(path: Path, grid, stacks: dict[str, np.ndarray], ylabel: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for algo, stack in stacks.items():
        with warnings.catch_warnings():
            # grid points before a run's first log entry are all NaN
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(stack, axis=0)
            std = np.nanstd(stack, axis=0)
        ax.plot(grid, mean, label=algo)
        ax.fill_between(grid, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("evaluations")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_heatmap(path, matrix: np.ndarray, title: str = ""):
    """PNG of a morphology heatmap: rows are modules (1-based), columns stiffness bins."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(np.ma.masked_invalid(matrix), origin="lower", aspect="auto", cmap="viridis",
                   extent=(-0.5, matrix.shape[1] - 0.5, 0.5, matrix.shape[0] + 0.5))
    ax.set_xlabel("stiffness bin")
    ax.set_ylabel("modules")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="distance closed (cm)")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def curve(run: RunRecord, grid: np.ndarray, metric: str = "best_fs_cm") -> np.ndarray:
    """Metric as a step function of the evaluation count, sampled on ``grid``."""
    ev = np.array([r["evaluations"] for r in run.log])
    val = np.array([r[metric] for r in run.log], dtype=np.float64)
    idx = np.searchsorted(ev, grid, side="right") - 1
    return np.where(idx >= 0, val[np.clip(idx, 0, None)], np.nan)


def summarize(runs: list[RunRecord]) -> dict:
    by_algo: dict[str, list[RunRecord]] = {}
    for r in runs:
        by_algo.setdefault(r.algorithm, []).append(r)
    summary = {"algorithms": {}, "comparisons": []}
    for algo, rs in sorted(by_algo.items()):
        summary["algorithms"][algo] = {m: describe([r.final(m) for r in rs]) for m in METRICS}
        summary["algorithms"][algo]["runs"] = [str(r.path) for r in rs]
    for a, b in itertools.combinations(sorted(by_algo), 2):
        for m in METRICS:
            xa = [r.final(m) for r in by_algo[a]]
            xb = [r.final(m) for r in by_algo[b]]
            res = rank_sum(xa, xb)
            summary["comparisons"].append({"metric": m, "a": a, "b": b, "rank_sum": res.statistic,
                                           "p_value": res.p_value, "method": res.method, "z": res.z})
    return summary


def report(out, dest=None, n_points: int = 101, task: str | None = None, images: bool = True) -> dict:
    """Summarize completed runs of one task.

    Writes ``report.json``, ``curves.csv`` (mean and std of each metric
    against evaluations), one heatmap CSV per run and, with ``images``, PNG
    versions of the curves and heatmaps.  The returned summary lists every
    file written under ``"artifacts"``.
    """
    runs = find_runs(out, task)
    if not runs:
        raise FileNotFoundError(f"no finished runs under {out}" + (f" for task {task!r}" if task else ""))
    tasks = sorted({r.manifest["task"] for r in runs})
    if len(tasks) > 1:
        raise ValueError(f"runs from several tasks under {out}: {tasks}; choose one with task=")
    dest = Path(dest or Path(out) / "report")
    (dest / "heatmaps").mkdir(parents=True, exist_ok=True)
    summary = summarize(runs)
    summary["task"] = tasks[0]
    artifacts = []
    budget = max(r.log[-1]["evaluations"] for r in runs)
    grid = np.linspace(0, budget, n_points).round().astype(int)
    algos = sorted({r.algorithm for r in runs})
    stacks = {m: {a: np.array([curve(r, grid, m) for r in runs if r.algorithm == a]) for a in algos}
              for m in METRICS}
    with open(dest / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluations"] + [f"{a}_{m}_{s}" for m in METRICS for a in algos for s in ("mean", "std")])
        for i, e in enumerate(grid):
            row = [int(e)]
            for m in METRICS:
                for a in algos:
                    col = stacks[m][a][:, i]
                    col = col[np.isfinite(col)]
                    row += [repr(float(col.mean())) if col.size else "",
                            repr(float(col.std(ddof=1))) if col.size > 1 else ""]
            w.writerow(row)
    artifacts.append(dest / "curves.csv")
    if images:
        for m in METRICS:
            _plot_curves(dest / f"curve_{m}.png", grid, stacks[m], m)
            artifacts.append(dest / f"curve_{m}.png")
    for r in runs:
        d0 = r.config.task_spec().initial_distance
        stem = f"{r.manifest['task']}_{r.algorithm}_run{r.manifest['run']:02d}"
        matrix = fitness_heatmap(r.archive("morphology"), d0)
        write_heatmap_csv(dest / "heatmaps" / f"{stem}.csv", matrix)
        artifacts.append(dest / "heatmaps" / f"{stem}.csv")
        if images:
            plot_heatmap(dest / "heatmaps" / f"{stem}.png", matrix, stem)
            artifacts.append(dest / "heatmaps" / f"{stem}.png")
    artifacts.append(dest / "report.json")
    summary["artifacts"] = [str(a) for a in artifacts]
    (dest / "report.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return summary


def heatmap(run_dir, archive: str = "morphology", dest=None) -> np.ndarray:
    """Distance-closed heatmap (cm) of one archive of a run; empty cells are NaN."""
    r = load_run(run_dir)
    m = fitness_heatmap(r.archive(archive), r.config.task_spec().initial_distance)
    write_heatmap_csv(dest or Path(run_dir) / f"heatmap_{archive}.csv", m)
    return m


@dataclass
class Projection:
    archive: Archive
    clamped: int
    max_fitness_error: float


def project_double_to_single(run_dir, write: bool = True) -> Projection:
    """Re-simulate the morphology-archive occupants of a dual-archive run and
    place them in a (morphology x controller) archive using the run's final
    controller-descriptor mapping.  Values outside the mapping's bounds are
    clamped to the nearest bin and counted."""
    r = load_run(run_dir)
    cfg = r.config
    task = cfg.task_spec()
    proj = r.projector()
    out = Archive(MORPH_DIMS + tuple(cfg.controller_bins), "projected")
    clamped = 0
    err = 0.0
    for cell, sol in r.archive("morphology").items():
        res = evaluate(sol.morphology, sol.controller, task, cfg.sim)
        err = max(err, abs(res.fitness - sol.fitness))
        c, was_clamped = proj.clamped_cell(res.sensory_data)
        clamped += was_clamped
        sol.trajectories = res.trajectories
        out.add(sol, tuple(cell) + c)
    if write:
        export_archive(out, Path(run_dir) / "archives", task.initial_distance, filename="projected.csv")
        write_heatmap_csv(Path(run_dir) / "heatmap_projected.csv", fitness_heatmap(out, task.initial_distance))
    return Projection(out, clamped, err)


def replay(run_dir, archive: str = "morphology", cell=None, dest=None) -> dict:
    """Re-simulate a stored solution (the archive's best unless ``cell`` is
    given) and write its per-target head trajectories."""
    r = load_run(run_dir)
    cfg = r.config
    task = cfg.task_spec()
    a = r.archive(archive)
    sol = a[tuple(cell)] if cell is not None else a.best()
    res = evaluate(sol.morphology, sol.controller, task, cfg.sim)
    dest = Path(dest or Path(run_dir) / f"replay_{sol.id}.csv")
    write_trajectory_csv(dest, res.seed_trajectories, cfg.sim.sample_period, seeds=task.noise_seeds)
    return {"solution_id": sol.id, "morphology": sol.morphology.to_record(), "stored_fitness": sol.fitness,
            "replayed_fitness": res.fitness, "fitness_cm": (task.initial_distance - res.fitness) * 100.0,
            "mean_distances": res.mean_distances.tolist(), "trajectory_csv": str(dest)}
