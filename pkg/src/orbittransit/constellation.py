"""Walker shells, TLE ingestion, circular propagation and eclipse tests."""

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import NamedTuple, Sequence

import numpy as np

from .constants import (EARTH_RADIUS_KM, EARTH_ROTATION_RAD_PER_MIN,
                        MU_EARTH)


class ConfigurationError(ValueError):
    pass


class TleError(ValueError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = "line %d: %s" % (line_number, message)
        super().__init__(message)


class UnsupportedOrbitError(TleError):
    pass


class EcefPosition(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self):
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class Satellite:
    id: int
    orbit_index: int
    in_plane_index: int
    altitude_km: float
    inclination_deg: float
    phase_deg: float
    raan_deg: float = 0.0
    storage_capacity: float = 8.0e6  # Mb (1 TB recorder)
    link_capacity: float = 1000.0  # Mbps

    def __post_init__(self):
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude must be positive")
        if not 0.0 <= self.phase_deg < 360.0:
            raise ConfigurationError("phase must lie in [0, 360)")
        if self.storage_capacity <= 0 or self.link_capacity <= 0:
            raise ConfigurationError("capacities must be positive")

    @property
    def radius_km(self):
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def period_min(self):
        return orbital_period_min(self.altitude_km)


@dataclass(frozen=True)
class ConstellationConfig:
    num_orbits: int
    sats_per_orbit: int
    altitude_km: float = 550.0
    inclination_deg: float = 53.0
    phase_offset_deg: float = 0.0
    epoch: float = 0.0
    storage_capacity: float = 8.0e6
    link_capacity: float = 1000.0

    @property
    def total(self):
        return self.num_orbits * self.sats_per_orbit

    def validate(self):
        if self.num_orbits < 1 or self.sats_per_orbit < 1:
            raise ConfigurationError("need at least one orbit and one satellite per orbit")
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude must be positive")
        if self.storage_capacity <= 0 or self.link_capacity <= 0:
            raise ConfigurationError("capacities must be positive")


PRESETS = {
    "starlink-s1": ConstellationConfig(72, 22, 550.0, 53.0),
    "oneweb": ConstellationConfig(18, 40, 1200.0, 87.9),
    "telesat": ConstellationConfig(28, 28, 1015.0, 98.98),
    "toy-4x4": ConstellationConfig(4, 4, 1200.0, 53.0),
}


def orbital_period_min(altitude_km):
    a = EARTH_RADIUS_KM + altitude_km
    return 2.0 * math.pi * math.sqrt(a ** 3 / MU_EARTH) / 60.0


def generate_walker(config: ConstellationConfig):
    config.validate()
    sats = []
    n_planes, per_plane = config.num_orbits, config.sats_per_orbit
    for p in range(n_planes):
        raan = 360.0 * p / n_planes
        for i in range(per_plane):
            phase = (360.0 * i / per_plane + config.phase_offset_deg * p) % 360.0
            sats.append(Satellite(
                id=p * per_plane + i, orbit_index=p, in_plane_index=i,
                altitude_km=config.altitude_km, inclination_deg=config.inclination_deg,
                phase_deg=phase, raan_deg=raan,
                storage_capacity=config.storage_capacity,
                link_capacity=config.link_capacity))
    return sats


def _elements(sats):
    raan = np.radians([s.raan_deg for s in sats])
    inc = np.radians([s.inclination_deg for s in sats])
    phase = np.radians([s.phase_deg for s in sats])
    radius = np.array([s.radius_km for s in sats])
    rate = 2.0 * np.pi / np.array([s.period_min for s in sats])  # rad/min
    return raan, inc, phase, radius, rate


def positions(sats: Sequence[Satellite], times, earth_rotation=True):
    """Positions [len(times), len(sats), 3] in km.

    With earth_rotation the frame is Earth-fixed (aligned with the inertial
    frame at epoch), otherwise inertial.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    raan, inc, phase, radius, rate = _elements(sats)
    u = phase[None, :] + rate[None, :] * times[:, None]
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(raan)[None, :], np.sin(raan)[None, :]
    ci, si = np.cos(inc)[None, :], np.sin(inc)[None, :]
    x = radius * (co * cu - so * su * ci)
    y = radius * (so * cu + co * su * ci)
    z = radius * (su * si)
    if earth_rotation:
        theta = (EARTH_ROTATION_RAD_PER_MIN * times)[:, None]
        c, s = np.cos(theta), np.sin(theta)
        x, y = c * x + s * y, -s * x + c * y
    return np.stack([x, y, z], axis=-1)


def propagate(sat: Satellite, t, earth_rotation=True):
    p = positions([sat], [t], earth_rotation)[0, 0]
    return EcefPosition(float(p[0]), float(p[1]), float(p[2]))


def subpoints(pos):
    """Geocentric latitude/longitude in degrees of Earth-fixed positions."""
    pos = np.asarray(pos)
    r = np.linalg.norm(pos, axis=-1)
    lat = np.degrees(np.arcsin(pos[..., 2] / r))
    lon = np.degrees(np.arctan2(pos[..., 1], pos[..., 0]))
    return lat, lon


def in_sunlight(pos, sun_direction=(1.0, 0.0, 0.0)):
    return bool(sunlit_mask(np.asarray(pos, dtype=float), sun_direction))


def sunlit_mask(pos, sun_direction=(1.0, 0.0, 0.0)):
    """Cylindrical-shadow test, vectorised over the leading axes of pos."""
    sun = np.asarray(sun_direction, dtype=float)
    along = pos @ sun
    perp2 = np.einsum("...i,...i->...", pos, pos) - along ** 2
    shadow = (along < 0) & (perp2 < EARTH_RADIUS_KM ** 2)
    return ~shadow


# --- TLE -------------------------------------------------------------------

def tle_checksum(line):
    s = 0
    for c in line[:68]:
        if c.isdigit():
            s += int(c)
        elif c == "-":
            s += 1
    return s % 10


def _tle_epoch(field):
    yy = int(field[:2])
    year = 2000 + yy if yy < 57 else 1900 + yy
    return datetime(year, 1, 1) + timedelta(days=float(field[2:]) - 1.0)


def _gmst_rad(when: datetime):
    # IAU 1982 expression truncated to the linear term, adequate for ground tracks
    jd = (when - datetime(2000, 1, 1, 12)).total_seconds() / 86400.0
    return math.radians((280.46061837 + 360.98564736629 * jd) % 360.0)


def _check_line(line, expected, lineno):
    if len(line) != 69:
        raise TleError("expected 69 characters, got %d" % len(line), lineno)
    if line[0] != expected:
        raise TleError("line should start with %s" % expected, lineno)
    if not line[68].isdigit() or tle_checksum(line) != int(line[68]):
        raise TleError("checksum mismatch", lineno)


def _parse_pairs(text):
    lines = [(n + 1, l.rstrip("\r\n")) for n, l in enumerate(text.splitlines())]
    lines = [(n, l) for n, l in lines if l.strip()]
    records = []
    k = 0
    while k < len(lines):
        n, l = lines[k]
        name = None
        if not l.startswith("1 "):
            name = l.strip()
            k += 1
            if k >= len(lines):
                raise TleError("name line without element lines", n)
        n1, l1 = lines[k]
        if k + 1 >= len(lines):
            raise TleError("missing second element line", n1)
        n2, l2 = lines[k + 1]
        _check_line(l1, "1", n1)
        _check_line(l2, "2", n2)
        if l1[2:7] != l2[2:7]:
            raise TleError("catalog numbers of line 1 and line 2 differ", n2)
        records.append((name, n1, l1, n2, l2))
        k += 2
    return records


def ingest_tle(text, storage_capacity=8.0e6, link_capacity=1000.0, raan_tolerance_deg=1.0,
               max_eccentricity=0.01):
    """Satellites from TLE text, grouped into orbits by clustering RAAN.

    Elements are advanced to the latest epoch in the file and RAAN is taken
    relative to Greenwich at that epoch, so the returned phases live in the
    same Earth-fixed frame as generate_walker.
    """
    records = _parse_pairs(text)
    if not records:
        return []
    parsed = []
    for name, n1, l1, n2, l2 in records:
        try:
            epoch = _tle_epoch(l1[18:32])
            inc = float(l2[8:16])
            raan = float(l2[17:25])
            ecc = float("0." + l2[26:33].strip())
            argp = float(l2[34:42])
            mean_anom = float(l2[43:51])
            mean_motion = float(l2[52:63])
        except ValueError as exc:
            raise TleError("malformed field (%s)" % exc, n2) from None
        if ecc > max_eccentricity:
            raise UnsupportedOrbitError("eccentricity %.4f beyond circular model" % ecc, n2)
        if mean_motion <= 0:
            raise TleError("non-positive mean motion", n2)
        parsed.append((epoch, inc, raan, argp + mean_anom, mean_motion))

    ref = max(p[0] for p in parsed)
    gmst = math.degrees(_gmst_rad(ref))
    rows = []
    for epoch, inc, raan, u, mm in parsed:
        dt_min = (ref - epoch).total_seconds() / 60.0
        u = (u + 360.0 * mm * dt_min / 1440.0) % 360.0
        n_rad_s = mm * 2.0 * math.pi / 86400.0
        a = (MU_EARTH / n_rad_s ** 2) ** (1.0 / 3.0)
        rows.append(((raan - gmst) % 360.0, inc, u, a - EARTH_RADIUS_KM))

    # cluster RAAN on the circle, splitting at gaps wider than the tolerance
    order = sorted(range(len(rows)), key=lambda k: rows[k][0])
    raans = [rows[k][0] for k in order]
    groups = [[order[0]]]
    for prev, cur, k in zip(raans, raans[1:], order[1:]):
        if cur - prev > raan_tolerance_deg:
            groups.append([])
        groups[-1].append(k)
    if len(groups) > 1 and raans[0] + 360.0 - raans[-1] <= raan_tolerance_deg:
        groups[0] = groups.pop() + groups[0]

    sats = []
    for p, members in enumerate(groups):
        members.sort(key=lambda k: rows[k][2])
        for i, k in enumerate(members):
            raan, inc, u, alt = rows[k]
            sats.append(Satellite(len(sats), p, i, alt, inc, u, raan,
                                  storage_capacity, link_capacity))
    return sats


def mean_motion_rev_per_day(sat: Satellite):
    return 1440.0 / sat.period_min


def format_tle(sat: Satellite, catalog_number=1, epoch="24001.00000000", name=None):
    """Render a circular-orbit TLE for sat (used for fixtures and round trips)."""
    l1 = "1 %05dU 24001A   %s  .00000000  00000-0  00000-0 0  999" % (catalog_number, epoch)
    l1 = l1.ljust(68)[:68]
    l1 += str(tle_checksum(l1))
    l2 = "2 %05d %8.4f %8.4f 0000001 %8.4f %8.4f %11.8f%5d" % (
        catalog_number, sat.inclination_deg, sat.raan_deg, 0.0, sat.phase_deg,
        mean_motion_rev_per_day(sat), 1)
    l2 = l2.ljust(68)[:68]
    l2 += str(tle_checksum(l2))
    lines = [l1, l2]
    if name:
        lines.insert(0, name)
    return "\n".join(lines)
