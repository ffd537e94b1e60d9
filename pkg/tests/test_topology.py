import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbittransit.constants import EARTH_RADIUS_KM
from orbittransit.constellation import PRESETS, ConfigurationError, generate_walker, positions
from orbittransit.topology import (GroundStation, Grid, build_isl_grid, coverage_ground_range_km,
                                   elevation_angle, gs_ecef, parse_catalog, snapshot,
                                   visible_pairs)


def _elevation_at(central, r):
    # slant triangle: station on the surface, satellite at radius r, angle at Earth's centre
    return math.degrees(math.atan2(math.cos(central) - EARTH_RADIUS_KM / r, math.sin(central)))


def _bisect_range(alt, el):
    r = EARTH_RADIUS_KM + alt
    lo, hi = 0.0, math.acos(EARTH_RADIUS_KM / r)
    for _ in range(200):
        mid = (lo + hi) / 2
        if _elevation_at(mid, r) > el:
            lo = mid
        else:
            hi = mid
    return EARTH_RADIUS_KM * lo


def test_zenith_is_ninety():
    gs = GroundStation(0, 10.0, 20.0, 1000.0)
    up = np.array(gs_ecef(gs))
    sat = up / np.linalg.norm(up) * (EARTH_RADIUS_KM + 550.0)
    assert elevation_angle(sat, gs) == pytest.approx(90.0, abs=1e-6)


def test_horizon_is_zero():
    gs = GroundStation(0, 0.0, 0.0, 1000.0)
    sat = np.array([EARTH_RADIUS_KM, 3000.0, 0.0])
    assert elevation_angle(sat, gs) == pytest.approx(0.0, abs=1e-9)


def test_range_at_25_degrees():
    ground, slant = coverage_ground_range_km(550.0, 25.0)
    central = _bisect_range(550.0, 25.0)
    assert ground == pytest.approx(central, abs=0.01)
    r = EARTH_RADIUS_KM + 550.0
    theta = central / EARTH_RADIUS_KM
    oracle_slant = math.sqrt(r ** 2 + EARTH_RADIUS_KM ** 2 - 2 * r * EARTH_RADIUS_KM * math.cos(theta))
    assert slant == pytest.approx(oracle_slant, abs=0.01)
    # the station-to-satellite distance is the one in the 1100-1300 km bracket
    assert 1100.0 <= slant <= 1300.0


def test_starlink_grid_degree_four():
    grid = Grid(72, 22)
    edges = build_isl_grid(grid)
    deg = np.zeros(grid.size, dtype=int)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    assert (deg == 4).all()


def test_three_by_three_edge_count():
    assert len(build_isl_grid(Grid(3, 3))) == 18


def test_edges_are_unordered_pairs():
    edges = build_isl_grid(Grid(4, 5))
    assert all(a < b for a, b in edges)
    assert all((b, a) not in edges for a, b in edges)


def test_grid_too_small():
    with pytest.raises(ConfigurationError):
        build_isl_grid(Grid(2, 5))


def test_no_stations_no_gsl(toy_sats):
    assert snapshot(toy_sats, [], 0.0).gsl_edges == frozenset()


def test_station_at_subpoint(toy_sats):
    p = positions(toy_sats, [7.0])[0, 5]
    lat = math.degrees(math.asin(p[2] / np.linalg.norm(p)))
    lon = math.degrees(math.atan2(p[1], p[0]))
    gs = GroundStation(9, lat, lon, 1000.0)
    assert (5, 9) in snapshot(toy_sats, [gs], 7.0).gsl_edges


def test_gsl_count_varies_over_orbit(catalog):
    sats = generate_walker(PRESETS["starlink-s1"])[:1]
    counts = {len(visible_pairs(sats, catalog, float(t))) for t in range(0, 96)}
    assert len(counts) > 2 and 0 in counts


def test_isl_independent_of_time(toy_sats, catalog):
    assert snapshot(toy_sats, catalog, 0.0).isl_edges == snapshot(toy_sats, catalog, 77.0).isl_edges


def test_snapshot_deterministic(toy_sats, catalog):
    assert snapshot(toy_sats, catalog, 13.0) == snapshot(toy_sats, catalog, 13.0)


def test_bundled_catalog(catalog):
    assert len(catalog) == 165
    assert len({g.id for g in catalog}) == 165


def test_catalog_errors():
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_catalog("0, 1, 2, 100, 8\n1, 2\n")
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_catalog("0, 1, 2, 100, 8\n0, 2, 3, 100, 8\n")


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 300), st.floats(5, 60), st.floats(0, 30))
def test_threshold_monotone(t, low, extra):
    sats = generate_walker(PRESETS["toy-4x4"])
    from orbittransit.topology import load_catalog
    cat = load_catalog()[::5]
    hi = visible_pairs(sats, cat, t, low + extra)
    assert hi <= visible_pairs(sats, cat, t, low)
