import numpy as np

from orbittransit import validation
from orbittransit.topology import Grid


def test_torus_edges_counts():
    # every satellite has four distinct neighbours once both sides exceed 2
    assert len(validation.torus_edges(3, 3)) == 18
    assert len(validation.torus_edges(8, 8)) == 128


def test_three_by_three_has_36_pairs():
    n = 9
    dist = validation._bfs_all(n, validation.torus_edges(3, 3))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    assert len(pairs) == 36
    grid = Grid(3, 3)
    for a, b in pairs:
        assert validation.oan_decomposition(grid, a, b) == dist[a, b]


def test_energy_walk_clean():
    assert validation.energy_walk(500, seed=1) == []


def test_check_result_line():
    r = validation.CheckResult("demo", True, {"x": 1}, 0.5)
    assert r.line() == 'PASS demo (0.5s) {"x": 1}'


def test_quick_report():
    text, data = validation.report(full=False)
    assert len(text.splitlines()) == len(validation.QUICK) == len(data)
    assert all(v["passed"] for v in data.values())
    assert np.isfinite([v["seconds"] for v in data.values()]).all()
