import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbittransit.constants import EARTH_RADIUS_KM, MU_EARTH
from orbittransit.constellation import (PRESETS, ConfigurationError, ConstellationConfig,
                                        Satellite, TleError, format_tle, generate_walker,
                                        in_sunlight, ingest_tle, mean_motion_rev_per_day,
                                        orbital_period_min, positions, propagate)

SAMPLE_TLE = (
    "1 44713U 19074A   24001.50000000  .00001103  00000-0  93645-4 0  9998\n"
    "2 44713  53.0540 123.4567 0001400  87.6543 272.4567 15.06412345123453\n"
)


def test_starlink_shell_size():
    sats = generate_walker(PRESETS["starlink-s1"])
    assert len(sats) == 1584
    assert {s.orbit_index for s in sats} == set(range(72))


def test_single_satellite_at_phase_zero():
    sats = generate_walker(ConstellationConfig(1, 1))
    assert len(sats) == 1 and sats[0].phase_deg == 0.0


def test_spacing_four_planes_three_sats():
    sats = generate_walker(ConstellationConfig(4, 3))
    assert [s.phase_deg for s in sats[:3]] == [0.0, 120.0, 240.0]
    assert [sats[3 * p].raan_deg for p in range(4)] == [0.0, 90.0, 180.0, 270.0]


def test_invalid_config():
    with pytest.raises(ConfigurationError):
        generate_walker(ConstellationConfig(0, 3))


def test_epoch_position_from_angles_only():
    s = Satellite(0, 0, 0, 550.0, 53.0, 30.0, 40.0)
    p = propagate(s, 0.0)
    r = EARTH_RADIUS_KM + 550.0
    u, o, i = map(math.radians, (30.0, 40.0, 53.0))
    expect = (r * (math.cos(o) * math.cos(u) - math.sin(o) * math.sin(u) * math.cos(i)),
              r * (math.sin(o) * math.cos(u) + math.cos(o) * math.sin(u) * math.cos(i)),
              r * math.sin(u) * math.sin(i))
    assert np.allclose(p, expect, rtol=1e-12)


def test_period_periodicity_without_rotation():
    s = Satellite(0, 0, 0, 550.0, 53.0, 10.0, 20.0)
    a = np.array(propagate(s, 0.0, earth_rotation=False))
    b = np.array(propagate(s, s.period_min, earth_rotation=False))
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-9


def test_period_at_550_km():
    # 2*pi*sqrt(a^3/mu) with a = 6921 km, evaluated independently
    assert orbital_period_min(550.0) == pytest.approx(95.50211815557677, rel=1e-12)
    assert abs(orbital_period_min(550.0) - 95.6) < 0.2


def test_empty_tle():
    assert ingest_tle("") == []


def test_tle_altitude_from_mean_motion():
    sats = ingest_tle(SAMPLE_TLE)
    assert len(sats) == 1
    # a = (mu / n^2)^(1/3) for n = 15.06412345 rev/day
    assert sats[0].altitude_km == pytest.approx(554.3107225496688, rel=1e-9)
    assert sats[0].inclination_deg == pytest.approx(53.054)


def test_tle_bad_checksum_names_line():
    bad = SAMPLE_TLE.replace("0  9998", "0  9997")
    with pytest.raises(TleError, match="line 1"):
        ingest_tle(bad)


def test_tle_round_trip_mean_motion():
    sats = generate_walker(ConstellationConfig(3, 4, 600.0, 70.0))
    text = "\n".join(format_tle(s, k + 1) for k, s in enumerate(sats))
    back = ingest_tle(text)
    assert len(back) == len(sats)
    assert len({s.orbit_index for s in back}) == 3
    for s in back:
        assert mean_motion_rev_per_day(s) == pytest.approx(mean_motion_rev_per_day(sats[0]),
                                                           rel=1e-6)


def test_sunlight_sides():
    assert in_sunlight((7000.0, 0.0, 0.0))
    assert not in_sunlight((-(EARTH_RADIUS_KM + 550.0), 0.0, 0.0))


def test_sunlit_fraction_one_orbit():
    # sun in the orbital plane: equatorial orbit, sun along +x
    s = Satellite(0, 0, 0, 550.0, 0.0, 0.0)
    ts = np.arange(0.0, s.period_min, 0.01)
    pos = positions([s], ts, earth_rotation=False)[:, 0]
    lit = np.mean([in_sunlight(p) for p in pos])
    assert 0.55 <= lit <= 0.70
    # shadow half-angle asin(R/a) gives a lit fraction of 1 - asin(R/a)/pi
    assert lit == pytest.approx(0.6277558931355165, abs=2e-3)


def test_walker_deterministic():
    assert generate_walker(PRESETS["toy-4x4"]) == generate_walker(PRESETS["toy-4x4"])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8), st.floats(300, 1500), st.floats(0, 99),
       st.floats(0, 1e4))
def test_radius_constant(n, m, alt, inc, t):
    sats = generate_walker(ConstellationConfig(n, m, alt, inc))
    r = np.linalg.norm(positions(sats, [t])[0], axis=-1)
    assert np.allclose(r, EARTH_RADIUS_KM + alt, rtol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 10), st.floats(0, 1e4))
def test_in_plane_separation_invariant(m, t):
    sats = generate_walker(ConstellationConfig(1, m, 550.0, 53.0))
    p = positions(sats[:2], [0.0, t], earth_rotation=False)
    cos0 = np.dot(p[0, 0], p[0, 1]) / np.linalg.norm(p[0, 0]) / np.linalg.norm(p[0, 1])
    cos1 = np.dot(p[1, 0], p[1, 1]) / np.linalg.norm(p[1, 0]) / np.linalg.norm(p[1, 1])
    assert cos0 == pytest.approx(cos1, abs=1e-9)
