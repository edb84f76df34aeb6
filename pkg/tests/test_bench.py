import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import synthetic_evaluator
from oracles import brute_force_p
from tsmr_qd.bench import ExperimentConfig, desk_preset, describe, paper_preset, preset, rank_sum, run_experiment, \
    run_seeds
from tsmr_qd.bench import analysis
from tsmr_qd.bench.cli import main
from tsmr_qd.bench.runner import ExperimentError, run_dir
from tsmr_qd.physics import TaskSpec

TINY = replace(desk_preset(), runs=2, budget=96, initial=48, schedule=(0, 1), seed=3)


def test_run_seeds():
    s = run_seeds(0, 10)
    assert len(set(s)) == 10 and s == run_seeds(0, 10)
    assert run_seeds(0, 3) == s[:3]
    assert run_seeds(1, 10) != s


def test_presets_and_round_trip():
    p, d = paper_preset(), desk_preset()
    assert (p.budget, p.initial, p.batch, p.runs) == (45_000, 1_080, 24, 10)
    assert (d.budget, d.initial) == (2_400, 240)
    assert ExperimentConfig.from_dict(json.loads(d.to_json())) == d
    assert ExperimentConfig.from_dict({"preset": "desk", "budget": 480}).budget == 480
    with pytest.raises(KeyError):
        ExperimentConfig.from_dict({"budgett": 1})
    with pytest.raises(ValueError):
        preset("huge")
    with pytest.raises(ValueError):
        replace(d, algorithms=("cma-me",))
    with pytest.raises(ValueError):
        replace(d, initial=5000)


def test_rank_sum_examples():
    assert rank_sum([1, 2, 3], [1, 2, 3]).p_value == 1.0
    r = rank_sum([1, 2, 3], [101, 102, 103])
    assert r.method == "exact" and r.p_value == pytest.approx(0.1)
    assert r.statistic == 6.0
    d = describe([10, 20, 30])
    assert (d["mean"], d["std"], d["median"]) == (20.0, 10.0, 20.0)
    with pytest.raises(ValueError):
        rank_sum([], [1.0])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=7), st.lists(st.integers(0, 6), min_size=1, max_size=7))
def test_exact_rank_sum_matches_enumeration(x, y):
    x, y = np.array(x, float), np.array(y, float)
    assert rank_sum(x, y, "exact").p_value == pytest.approx(brute_force_p(x, y), abs=1e-12)


def test_normal_close_to_exact_at_ten():
    rng = np.random.default_rng(0)
    for _ in range(30):
        x, y = rng.normal(size=10), rng.normal(0.8, 1.0, size=10)
        assert abs(rank_sum(x, y, "exact").p_value - rank_sum(x, y, "normal").p_value) <= 0.02
    assert rank_sum(rng.normal(size=11), rng.normal(size=11)).method == "normal"


def test_normal_mode_worst_case_over_all_rank_sums():
    """One split of ranks 1..20 per attainable rank sum; without ties p depends only on the sum."""
    for w in range(55, 156):
        # any sample with this rank sum: greedily pick ranks from the top
        chosen, need = [], w
        for r in range(20, 0, -1):
            rest = 10 - len(chosen) - 1
            if rest >= 0 and need - r >= rest * (rest + 1) / 2:
                chosen.append(r)
                need -= r
        assert sum(chosen) == w and len(chosen) == 10
        x = np.array(chosen, float)
        y = np.array(sorted(set(range(1, 21)) - set(chosen)), float)
        assert abs(rank_sum(x, y, "exact").p_value - rank_sum(x, y, "normal").p_value) <= 0.02


def test_normal_mode_without_continuity_correction():
    r = rank_sum(np.arange(10.0), np.arange(10.0) + 100, "normal", continuity=False)
    assert r.p_value == pytest.approx(math.erfc(50 / math.sqrt(175) / math.sqrt(2)))
    assert r.p_value == pytest.approx(0.000157, abs=5e-7)


def _fake(cfg):
    return synthetic_evaluator(cfg.task_spec(), cfg.sim)


def test_smoke_run_and_report(tmp_path):
    out = tmp_path / "out"
    dirs = run_experiment(TINY, out, evaluate_fn=_fake(TINY))
    assert len(dirs) == 3 * 2
    for d in dirs:
        m = json.loads((d / "manifest.json").read_text())
        assert m["complete"] and not m["failed"] and m["evaluations"] == TINY.budget
        assert (d / "log.jsonl").exists() and (d / "best.json").exists()
    assert (run_dir(out, "goal", "dm-me", 0) / "projector.json").exists()
    summary = analysis.report(out)
    assert set(summary["algorithms"]) == {"vie-neat", "me", "dm-me"}
    assert all((tmp_path / "out").joinpath(a).exists() for a in summary["artifacts"])
    assert any(a.endswith(".png") for a in summary["artifacts"])
    header = (out / "report" / "curves.csv").read_text().splitlines()[0].split(",")
    assert "dm-me_best_fs_cm_mean" in header and "me_morph_coverage_std" in header
    # a rerun skips finished runs and leaves them untouched
    before = (dirs[0] / "log.jsonl").read_bytes()
    run_experiment(TINY, out, evaluate_fn=lambda m, c: 1 / 0)
    assert (dirs[0] / "log.jsonl").read_bytes() == before


def test_resume_reruns_on_config_change(tmp_path):
    cfg = replace(TINY, algorithms=("me",), runs=1)
    run_experiment(cfg, tmp_path, evaluate_fn=_fake(cfg))
    changed = replace(cfg, batch=12)
    with pytest.raises(ExperimentError):
        run_experiment(changed, tmp_path, evaluate_fn=lambda m, c: 1 / 0)


def test_exports_are_reproducible(tmp_path):
    cfg = replace(TINY, runs=1)
    for name in ("a", "b"):
        run_experiment(cfg, tmp_path / name, evaluate_fn=_fake(cfg))
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        a, b = (tmp_path / "a" / f).read_bytes(), (tmp_path / "b" / f).read_bytes()
        if f.name == "manifest.json":
            a, b = (json.loads(x) for x in (a, b))
            a.pop("timestamps"), b.pop("timestamps")
        assert a == b, f


def test_failing_run_is_flagged(tmp_path):
    cfg = replace(TINY, algorithms=("me",), runs=1)

    def broken(m, c):
        raise RuntimeError("simulator exploded")

    with pytest.raises(ExperimentError) as exc:
        run_experiment(cfg, tmp_path, evaluate_fn=broken)
    assert len(exc.value.failures) == 1
    m = json.loads((run_dir(tmp_path, "goal", "me", 0) / "manifest.json").read_text())
    assert m["failed"] and not m["complete"] and "simulator exploded" in m["error"]
    with pytest.raises(FileNotFoundError):
        analysis.report(tmp_path)


def test_report_refuses_mixed_tasks(tmp_path):
    for task in ("goal", "squeeze"):
        cfg = replace(TINY, task=task, algorithms=("me",), runs=1)
        run_experiment(cfg, tmp_path, evaluate_fn=_fake(cfg))
    with pytest.raises(ValueError):
        analysis.report(tmp_path, images=False)
    s = analysis.report(tmp_path, task="squeeze", images=False)
    assert s["task"] == "squeeze"
    assert not any(a.endswith(".png") for a in s["artifacts"])


@pytest.mark.slow
def test_projection_and_replay_with_simulator(tmp_path):
    cfg = replace(TINY, algorithms=("dm-me",), runs=1, budget=48, initial=24)
    (d,) = run_experiment(cfg, tmp_path)
    r = analysis.load_run(d)
    a_e = r.archive("morphology")
    p = analysis.project_double_to_single(d)
    # one occupant per morphology cell, never more occupants than the input
    assert len(p.archive) == len(a_e)
    assert {c[:2] for c in p.archive.occupied()} == set(a_e.occupied())
    assert p.max_fitness_error == 0.0
    info = analysis.replay(d)
    assert info["replayed_fitness"] == info["stored_fitness"]
    rows = (d / f"replay_{info['solution_id']}.csv").read_text().splitlines()
    assert rows[0] == "target,seed,t,x,y" and len(rows) == 1 + 4 * 2 * 40


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"preset": "desk", "budgett": 3}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "budgett" in capsys.readouterr().err
    assert main(["report", "--out", str(tmp_path / "nothing")]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--algo", "cma-me"])


def test_cli_heatmap_and_report(tmp_path, capsys):
    cfg = replace(TINY, algorithms=("me", "dm-me"), runs=1)
    run_experiment(cfg, tmp_path, evaluate_fn=_fake(cfg))
    d = run_dir(tmp_path, "goal", "me", 0)
    assert main(["heatmap", "--run", str(d)]) == 0
    assert (d / "heatmap_morphology.csv").exists()
    assert main(["report", "--out", str(tmp_path), "--no-images"]) == 0
    out = capsys.readouterr().out
    assert "morph_qd_score: dm-me vs me" in out or "morph_qd_score: me vs dm-me" in out


def test_task_presets_by_name():
    assert TaskSpec.by_name("goal") == TaskSpec.goal()
    assert math.isclose(TaskSpec.by_name("squeeze").initial_distance, 0.60)
