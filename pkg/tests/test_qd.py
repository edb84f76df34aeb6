import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsmr_qd.morphology import MorphologyGenome, random_morphology
from tsmr_qd.neuro import minimal_genome
from tsmr_qd.qd import (Archive, Solution, export_archive, fitness_heatmap, import_archive, random_selection,
                        read_heatmap_csv, reinsert, write_heatmap_csv)

_CTRL = minimal_genome(2, 20, np.random.default_rng(0))


def sol(f, sid=-1, m=None):
    return Solution(m or MorphologyGenome(1, 0, ()), _CTRL, f, id=sid)


def test_insertion_rules():
    a = Archive((9, 10))
    assert a.add(sol(0.30), (1, 1)) == "inserted"
    assert a.add(sol(0.20), (1, 1)) == "replaced"
    assert a.add(sol(0.20), (1, 1)) == "rejected"
    assert a.add(sol(0.25), (1, 1)) == "rejected"
    assert a[(1, 1)].fitness == 0.20


def test_cell_out_of_range():
    a = Archive((9, 10))
    with pytest.raises(IndexError):
        a.add(sol(0.1), (9, 0))
    with pytest.raises(IndexError):
        a.add(sol(0.1), (0, 0, 0))


@settings(max_examples=300)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.floats(0, 1, allow_nan=False)), max_size=40))
def test_archive_matches_replay_oracle(seq):
    a = Archive((3, 3))
    best: dict = {}
    for i, j, f in seq:
        before = a.qd_score(1.0)
        a.add(sol(f), (i, j))
        best[(i, j)] = min(best.get((i, j), math.inf), f)
        assert a.qd_score(1.0) >= before - 1e-9
    assert {c: s.fitness for c, s in a.items()} == best


def test_selection_single_occupant():
    a = Archive((9, 10))
    s = sol(0.1)
    a.add(s, (3, 3))
    assert all(x is s for x in random_selection([a], 24, np.random.default_rng(0)))


def test_selection_half_half():
    a, b = Archive((9, 10), "a"), Archive((9, 10), "b")
    sa, sb = sol(0.1), sol(0.2)
    a.add(sa, (0, 0))
    b.add(sb, (0, 0))
    batch = random_selection([a, b], 24, np.random.default_rng(0))
    assert sum(x is sa for x in batch) == 12 and sum(x is sb for x in batch) == 12


def test_selection_uniform_over_occupied_cells():
    a = Archive((9, 10))
    sols = [sol(0.1 * k) for k in range(10)]
    for k, s in enumerate(sols):
        a.add(s, (k % 9, k))
    draws = random_selection([a], 100_000, np.random.default_rng(1))
    freq = Counter(id(x) for x in draws)
    assert all(abs(freq[id(s)] / 1e5 - 0.1) <= 0.01 for s in sols)


def test_selection_from_empty_archive_fails():
    with pytest.raises(ValueError):
        random_selection([Archive((9, 10))], 4, np.random.default_rng(0))


def test_qd_score_and_coverage():
    a = Archive((9, 10))
    assert a.qd_score(0.45) == 0 and a.coverage() == 0
    a.add(sol(0.45 - 0.175), (2, 3))
    assert a.qd_score(0.45) == pytest.approx(17.5)
    for k in range(45):
        a.add(sol(0.3), divmod(k, 10))
    assert a.coverage() == 0.5
    for k in range(90):
        a.add(sol(0.3), divmod(k, 10))
    assert a.coverage() == 1.0


def test_reinsert_collision_keeps_better():
    a = Archive((2, 2))
    good, bad = sol(0.1), sol(0.2)
    a.add(bad, (0, 0))
    a.add(good, (1, 1))
    b = reinsert(a, lambda s: (0, 1))
    assert len(b) == 1 and b[(0, 1)] is good


def test_heatmap_examples():
    a = Archive((9, 10))
    assert np.all(np.isnan(fitness_heatmap(a, 0.45)))
    a.add(sol(0.45 - 0.175), (2, 3))
    m = fitness_heatmap(a, 0.45)
    assert np.sum(~np.isnan(m)) == 1 and m[2, 3] == pytest.approx(17.5)


def test_heatmap_4d_reduction_matches_brute_force():
    rng = np.random.default_rng(2)
    a = Archive((9, 10, 9, 10))
    for _ in range(600):
        a.add(sol(float(rng.random())), tuple(int(v) for v in rng.integers(0, (9, 10, 9, 10))))
    m = fitness_heatmap(a, 0.45)
    for i in range(9):
        for j in range(10):
            vals = [(0.45 - s.fitness) * 100 for c, s in a.items() if c[:2] == (i, j)]
            if vals:
                assert m[i, j] == pytest.approx(max(vals))
            else:
                assert math.isnan(m[i, j])


def test_heatmap_csv_round_trip(tmp_path):
    m = np.array([[1.5, math.nan], [math.nan, -2.25]])
    write_heatmap_csv(tmp_path / "h.csv", m)
    back = read_heatmap_csv(tmp_path / "h.csv")
    assert np.array_equal(np.isnan(back), np.isnan(m))
    assert back[0, 0] == 1.5 and back[1, 1] == -2.25


def test_export_import_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    a = Archive((9, 10, 9, 10), "me")
    for k in range(50):
        m = random_morphology(rng)
        s = Solution(m, minimal_genome(2, 20, rng), float(rng.random()), id=k)
        a.add(s, m.descriptor + tuple(int(v) for v in rng.integers(0, (9, 10))))
    path = export_archive(a, tmp_path, 0.45)
    b = import_archive(path, a.dims)
    assert b.occupied() == a.occupied()
    for c in a.occupied():
        assert b[c].fitness == a[c].fitness
        assert b[c].morphology == a[c].morphology
        assert b[c].controller.to_record() == a[c].controller.to_record()
        assert b[c].id == a[c].id
