import collections

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import window_graph
from orbittransit.baselines import (StrategyId, route_isl_shortest, route_pco_withhold,
                                    select_nearest, select_nearest_available, station_order)
from orbittransit.constellation import ConfigurationError
from orbittransit.scheduler import Mode, SchedulingFailure
from orbittransit.tasking import Task
from orbittransit.topology import GroundStation


def test_strategy_labels():
    assert StrategyId.parse("orbittransit").label == "orbittransit"
    s = StrategyId.parse("nearest_available+pco_withhold")
    assert (s.selection, s.routing) == ("nearest_available", "pco_withhold")
    assert s.label == "nearest_available+pco_withhold"
    with pytest.raises(ConfigurationError):
        StrategyId.parse("closest+isl_shortest")
    with pytest.raises(ConfigurationError):
        StrategyId("nearest", "teleport")


def test_single_station_is_nearest(toy_oan):
    only = [GroundStation(7, -40.0, 100.0, 500.0)]
    assert select_nearest(Task(0, 3, 10.0, 60.0, 0.0), toy_oan, 0, only) == 7


def test_station_under_origin_is_nearest(toy_oan, catalog):
    lat, lon = float(toy_oan.lat[5, 12]), float(toy_oan.lon[5, 12])
    here = GroundStation(999, lat, lon, 500.0)
    stations = list(catalog) + [here]
    assert select_nearest(Task(0, 5, 10.0, 60.0, 12.0), toy_oan, 12, stations) == 999
    order, dist = station_order(Task(0, 5, 10.0, 60.0, 12.0), toy_oan, 12, stations)
    assert dist[order[0]] == pytest.approx(0.0, abs=1e-6)
    assert (np.diff(dist[order]) >= 0).all()


def test_nearest_available_skips_full_station(toy_oan):
    t = Task(0, 2, 100.0, 60.0, 0.0)
    order, _ = station_order(t, toy_oan, 0)
    g0, g1 = int(order[0]), int(order[1])
    cap = np.full(len(toy_oan.stations), 150.0)
    load = np.zeros((len(toy_oan.stations), 10))
    assert select_nearest_available(t, toy_oan, 0, load, cap, lambda g: 3) == toy_oan.stations[g0].id
    load[g0, 3] = 100.0
    assert select_nearest_available(t, toy_oan, 0, load, cap, lambda g: 3) == toy_oan.stations[g1].id
    load[:, 3] = 100.0
    with pytest.raises(SchedulingFailure):
        select_nearest_available(t, toy_oan, 0, load, cap, lambda g: 3)


def test_bent_pipe_has_zero_hops():
    oan = window_graph([(4, 0, 0, 10)])
    p = route_isl_shortest(Task(0, 4, 10.0, 60.0, 0.0), 0, oan, 0)
    assert p.mode == Mode.ISL_ONLY and p.isl_path == (4,) and p.isl_hops == 0


def test_no_visible_satellite_gives_none():
    oan = window_graph([(4, 0, 20, 30)])
    assert route_isl_shortest(Task(0, 0, 10.0, 60.0, 0.0), 0, oan, 0) is None


def _bfs_hops(orbits, per, src):
    """Independent BFS over the wrap-around grid."""
    def nb(s):
        p, i = divmod(s, per)
        return [((p + dp) % orbits) * per + (i + di) % per
                for dp, di in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    dist = {src: 0}
    q = collections.deque([src])
    while q:
        u = q.popleft()
        for v in nb(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 24), st.lists(st.integers(0, 24), min_size=1, max_size=4, unique=True))
def test_path_length_is_bfs_distance(src, seen):
    oan = window_graph([(s, 0, 0, 5) for s in seen], orbits=5, per_orbit=5)
    p = route_isl_shortest(Task(0, src, 10.0, 60.0, 0.0), 0, oan, 0)
    dist = _bfs_hops(5, 5, src)
    assert p.isl_hops == min(dist[s] for s in seen)
    assert p.isl_path[0] == src and p.isl_path[-1] in seen
    for a, b in zip(p.isl_path, p.isl_path[1:]):
        assert dist[b] == dist[a] + 1


def test_withhold_waits_for_next_revisit():
    oan = window_graph([(0, 0, 5, 7), (0, 0, 30, 32)])
    t = Task(0, 0, 10.0, 60.0, 0.0)
    p = route_pco_withhold(t, 0, oan, 0)
    assert p.offload == (0, 5) and p.carry_intervals == [(0, 0, 5)]
    p = route_pco_withhold(t, 0, oan, 0, admits=lambda k: k >= 20)
    assert p.offload == (0, 30) and p.isl_path == ()
    with pytest.raises(SchedulingFailure) as e:
        route_pco_withhold(Task(0, 0, 10.0, 20.0, 0.0), 0, oan, 0, admits=lambda k: k >= 20)
    assert e.value.reason == "timeout"
