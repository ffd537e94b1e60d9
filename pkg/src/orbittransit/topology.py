"""Ground stations, elevation gating and the +Grid ISL topology."""

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np

from .constants import DEFAULT_ELEVATION_DEG, EARTH_RADIUS_KM
from .constellation import ConfigurationError, EcefPosition, positions


@dataclass(frozen=True)
class GroundStation:
    id: int
    latitude_deg: float
    longitude_deg: float
    capacity: float  # Mbps
    antenna_count: int = 8
    name: str = ""

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ConfigurationError("latitude out of range for station %s" % self.id)
        if not -180.0 < self.longitude_deg <= 180.0:
            raise ConfigurationError("longitude out of range for station %s" % self.id)
        if self.capacity <= 0:
            raise ConfigurationError("station %s needs positive capacity" % self.id)


@dataclass(frozen=True)
class LinkSnapshot:
    tick: float
    isl_edges: frozenset
    gsl_edges: frozenset


def parse_catalog(text, source="<catalog>"):
    stations = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 5:
            raise ConfigurationError("%s line %d: expected 5 fields" % (source, n))
        try:
            gs = GroundStation(int(parts[0]), float(parts[1]), float(parts[2]),
                               float(parts[3]), int(parts[4]),
                               parts[5] if len(parts) > 5 else "")
        except ValueError as exc:
            raise ConfigurationError("%s line %d: %s" % (source, n, exc)) from None
        stations.append(gs)
    ids = [g.id for g in stations]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("%s: duplicate station ids" % source)
    return stations


def load_catalog(path=None):
    """Stations from a catalog file; the bundled 165-station catalog by default."""
    if path is None or path == "bundled":
        text = resources.files("orbittransit.data").joinpath("ground_stations.csv").read_text()
        return parse_catalog(text, "ground_stations.csv")
    with open(path) as fh:
        return parse_catalog(fh.read(), str(path))


def station_positions(stations):
    lat = np.radians([g.latitude_deg for g in stations])
    lon = np.radians([g.longitude_deg for g in stations])
    return EARTH_RADIUS_KM * np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1
    ).reshape(-1, 3)


def gs_ecef(gs: GroundStation):
    p = station_positions([gs])[0]
    return EcefPosition(*map(float, p))


def elevation_angle(sat_pos, gs: GroundStation):
    g = station_positions([gs])[0]
    return float(elevation_matrix(np.asarray(sat_pos, dtype=float)[None, :], g[None, :])[0, 0])


def elevation_matrix(sat_pos, gs_pos):
    """Elevation in degrees for every (satellite, station) pair.

    sat_pos has shape [..., S, 3] and gs_pos [G, 3]; result [..., S, G].
    """
    up = gs_pos / np.linalg.norm(gs_pos, axis=-1, keepdims=True)
    rel = sat_pos[..., :, None, :] - gs_pos
    dist = np.linalg.norm(rel, axis=-1)
    sin_el = np.einsum("...sgk,gk->...sg", rel, up) / dist
    return np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


def great_circle_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    c = np.sin(p1) * np.sin(p2) + np.cos(p1) * np.cos(p2) * np.cos(dl)
    return EARTH_RADIUS_KM * np.arccos(np.clip(c, -1.0, 1.0))


class Grid:
    """Torus indexing for a regular constellation of N planes by S slots."""

    def __init__(self, num_orbits, sats_per_orbit, ids=None):
        self.num_orbits = num_orbits
        self.sats_per_orbit = sats_per_orbit
        n = num_orbits * sats_per_orbit
        self.ids = np.arange(n) if ids is None else np.asarray(ids)
        self.orbit = np.repeat(np.arange(num_orbits), sats_per_orbit)
        self.slot = np.tile(np.arange(sats_per_orbit), num_orbits)

    @classmethod
    def from_satellites(cls, sats):
        n_orb = max(s.orbit_index for s in sats) + 1
        per = [0] * n_orb
        for s in sats:
            per[s.orbit_index] += 1
        if len(set(per)) != 1:
            raise ConfigurationError("irregular constellation: orbit sizes %s" % sorted(set(per)))
        for k, s in enumerate(sats):
            if s.id != k or s.orbit_index * per[0] + s.in_plane_index != k:
                raise ConfigurationError("satellite ids must be orbit-major (id = orbit*S + slot)")
        return cls(n_orb, per[0])

    @property
    def size(self):
        return self.num_orbits * self.sats_per_orbit

    def sat(self, orbit, slot):
        return (orbit % self.num_orbits) * self.sats_per_orbit + slot % self.sats_per_orbit

    def neighbors(self, sat):
        p, i = divmod(int(sat), self.sats_per_orbit)
        out = {self.sat(p, i - 1), self.sat(p, i + 1), self.sat(p - 1, i), self.sat(p + 1, i)}
        out.discard(int(sat))
        return sorted(out)

    @cached_property
    def adjacency(self):
        return [self.neighbors(s) for s in range(self.size)]

    def ring(self, a, b, n):
        d = abs(a - b) % n
        return min(d, n - d)

    def hops(self, a, b):
        """Closed-form +Grid distance (vectorised over either argument)."""
        pa, ia = np.divmod(np.asarray(a), self.sats_per_orbit)
        pb, ib = np.divmod(np.asarray(b), self.sats_per_orbit)
        dp = np.abs(pa - pb) % self.num_orbits
        di = np.abs(ia - ib) % self.sats_per_orbit
        return np.minimum(dp, self.num_orbits - dp) + np.minimum(di, self.sats_per_orbit - di)

    def bfs_path(self, src, targets, allowed=None):
        """Fewest-hop path from src to any satellite in targets.

        allowed is an optional boolean mask of usable relays (src and the
        reached target must be allowed too).  Neighbours are expanded in
        ascending id order so ties resolve to the lowest ids.
        """
        src = int(src)
        if allowed is not None and not allowed[src]:
            return None
        targets = set(int(t) for t in targets)
        if not targets:
            return None
        if src in targets:
            return [src]
        adj = self.adjacency
        prev = {src: None}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v in prev or (allowed is not None and not allowed[v]):
                    continue
                prev[v] = u
                if v in targets:
                    path = [v]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                q.append(v)
        return None


def build_isl_grid(constellation):
    """Undirected +Grid edges as (low id, high id) pairs."""
    grid = constellation if isinstance(constellation, Grid) else Grid.from_satellites(constellation)
    if grid.num_orbits < 3 or grid.sats_per_orbit < 3:
        raise ConfigurationError("+Grid needs at least 3 orbits and 3 satellites per orbit")
    edges = set()
    for s in range(grid.size):
        for n in grid.neighbors(s):
            edges.add((min(s, n), max(s, n)))
    return edges


def visible_pairs(sats, stations, t, threshold_deg=DEFAULT_ELEVATION_DEG, earth_rotation=True):
    if not stations:
        return set()
    pos = positions(sats, [t], earth_rotation)[0]
    el = elevation_matrix(pos, station_positions(stations))
    s_idx, g_idx = np.nonzero(el >= threshold_deg)
    return {(sats[a].id, stations[b].id) for a, b in zip(s_idx, g_idx)}


def snapshot(constellation, stations, t, threshold_deg=DEFAULT_ELEVATION_DEG, earth_rotation=True):
    isl = frozenset(build_isl_grid(constellation))
    gsl = frozenset(visible_pairs(constellation, stations, t, threshold_deg, earth_rotation))
    return LinkSnapshot(t, isl, gsl)


def coverage_ground_range_km(altitude_km, elevation_deg):
    """Ground range and slant range at which a satellite sits at the given elevation."""
    r = EARTH_RADIUS_KM + altitude_km
    el = math.radians(elevation_deg)
    nadir = math.asin(EARTH_RADIUS_KM * math.cos(el) / r)
    central = math.pi / 2 - el - nadir
    slant = r * math.sin(central) / math.cos(el)
    return EARTH_RADIUS_KM * central, slant
