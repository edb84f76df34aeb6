# %% [markdown]
# # A tiny end-to-end experiment
#
# This runs MAP-Elites and Double-Map MAP-Elites on goal reaching with a very
# small budget (a few minutes on one CPU). It then summarizes the runs and
# projects the dual-archive result onto a single combined archive. The same
# steps are available from the command line:
#
# ```
# tsmr-qd run --preset desk --task goal --runs 3 --out results
# tsmr-qd report --out results
# tsmr-qd project --run results/goal/dm-me/run_00
# ```

# %%
from dataclasses import replace
from pathlib import Path

from tsmr_qd.bench import desk_preset, run_experiment
from tsmr_qd.bench import analysis

OUT = Path(__file__).resolve().parent / "_out" / "tiny"
cfg = replace(desk_preset(), algorithms=("me", "dm-me"), runs=1, budget=96, initial=48, schedule=(0, 1))
print(cfg.to_json())

# %%
dirs = run_experiment(cfg, OUT)
for d in dirs:
    print(d, sorted(p.name for p in d.iterdir()))

# %% [markdown]
# Every run directory is self-describing. Its manifest holds the full
# configuration, the run seed and timings. `log.jsonl` has one line per
# generation.

# %%
run = analysis.load_run(dirs[-1])
for row in run.log:
    print({k: round(v, 4) if isinstance(v, float) else v for k, v in row.items()})

# %% [markdown]
# ## Summary across runs
#
# The report gives per-algorithm statistics, pairwise rank-sum tests and
# curves against evaluations. It also writes one heatmap per run.

# %%
summary = analysis.report(OUT)
for algo, stats in summary["algorithms"].items():
    print(algo, {m: round(stats[m]["mean"], 2) for m in analysis.METRICS})
print(len(summary["artifacts"]), "files written, e.g.", summary["artifacts"][0])

# %% [markdown]
# ## Double-to-single projection
#
# Re-simulating the morphology-archive occupants and placing them with the
# run's final controller mapping shows how the dual archives would fill a
# single four-dimensional one.

# %%
p = analysis.project_double_to_single(dirs[-1])
print(f"{len(p.archive)} occupants, {p.clamped} clamped, max fitness error {p.max_fitness_error}")
info = analysis.replay(dirs[-1])
print("best solution re-simulated:", round(info["fitness_cm"], 2), "cm; trajectory in", info["trajectory_csv"])
