"""Orbit-as-Node graph: orbit-level ring routing and PCO delivery times."""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .constants import DEFAULT_ELEVATION_DEG, EARTH_RADIUS_KM
from .constellation import ConfigurationError, positions, subpoints, sunlit_mask
from .topology import Grid, station_positions

UNREACHABLE = math.inf


@dataclass(frozen=True)
class VisibilityWindow:
    gs_id: int
    start: float
    end: float
    entry_satellite_phase: float = 0.0


@dataclass
class OrbitNode:
    orbit_index: int
    member_satellites: tuple
    reachable_stations: dict = field(default_factory=dict)


class OanGraph:
    """Orbit-level view of a constellation over a finite horizon.

    Per-satellite visibility is kept as a boolean tensor vis[sat, gs, k]
    sampled every `step` minutes; orbit windows are unions over members.
    """

    def __init__(self, grid, stations, horizon, step, vis, sunlit, phase0=None, rate=None,
                 lat=None, lon=None, pos=None, link_capacity=None, period_min=None):
        self.grid = grid
        self.stations = list(stations)
        self.horizon = horizon
        self.step = step
        self.vis = vis
        self.sunlit = sunlit
        self.phase0 = phase0
        self.rate = rate
        self.lat = lat
        self.lon = lon
        self.pos = pos
        self.gs_index = {g.id: k for k, g in enumerate(self.stations)}
        n = grid.size
        self.link_capacity = np.full(n, 1000.0) if link_capacity is None else np.asarray(link_capacity)
        self.period_min = period_min

    # -- construction -----------------------------------------------------

    @classmethod
    def from_windows(cls, num_orbits, sats_per_orbit, stations, horizon, windows, step=1,
                     dark=(), link_capacity=1000.0, period_min=None):
        """Graph from an explicit per-satellite window table.

        windows: iterable of (sat, gs_id, start, end) with visibility on
        [start, end); dark: iterable of (sat, start, end) eclipse intervals.
        """
        grid = Grid(num_orbits, sats_per_orbit)
        k_count = int(horizon // step) + 1
        gs_index = {g.id: k for k, g in enumerate(stations)}
        vis = np.zeros((grid.size, len(stations), k_count), dtype=bool)
        for sat, gid, start, end in windows:
            a = int(math.ceil(start / step))
            b = int(math.ceil(end / step))
            vis[sat, gs_index[gid], a:b] = True
        sunlit = np.ones((grid.size, k_count), dtype=bool)
        for sat, start, end in dark:
            sunlit[sat, int(math.ceil(start / step)):int(math.ceil(end / step))] = False
        return cls(grid, stations, horizon, step, vis, sunlit,
                   link_capacity=np.full(grid.size, float(link_capacity)), period_min=period_min)

    @property
    def num_orbits(self):
        return self.grid.num_orbits

    @property
    def num_samples(self):
        return self.vis.shape[2]

    def index(self, t):
        """Sample index of the first sample at or after t."""
        return int(math.ceil(t / self.step - 1e-9))

    def time(self, k):
        return k * self.step

    @cached_property
    def nodes(self):
        n_orb, per = self.grid.num_orbits, self.grid.sats_per_orbit
        out = []
        union = self.vis.reshape(n_orb, per, len(self.stations), self.vis.shape[2]).any(axis=1)
        for l in range(n_orb):
            members = tuple(range(l * per, (l + 1) * per))
            reach = {}
            for g, gs in enumerate(self.stations):
                row = union[l, g]
                if not row.any():
                    continue
                reach[gs.id] = self._runs(row, members, g)
            out.append(OrbitNode(l, members, reach))
        return out

    def _runs(self, row, members, g):
        padded = np.concatenate([[False], row, [False]])
        d = np.diff(padded.astype(np.int8))
        starts = np.nonzero(d == 1)[0]
        ends = np.nonzero(d == -1)[0]
        wins = []
        for a, b in zip(starts, ends):
            start = self.time(a)
            end = min(self.time(b), self.horizon)
            if end <= start:
                continue
            first = next(m for m in members if self.vis[m, g, a])
            wins.append(VisibilityWindow(self.stations[g].id, start, end, self.phase_at(first, start)))
        return wins

    def phase_at(self, sat, t):
        if self.phase0 is None:
            return 0.0
        return float(np.degrees(self.phase0[sat] + self.rate[sat] * t) % 360.0)

    # -- queries ----------------------------------------------------------

    def orbit_of(self, sat):
        return int(sat) // self.grid.sats_per_orbit

    def counterpart(self, sat, delta):
        p, i = divmod(int(sat), self.grid.sats_per_orbit)
        return self.grid.sat(p + delta, i)

    def neighbors(self, l):
        n = self.num_orbits
        return sorted({(l - 1) % n, (l + 1) % n} - {l})

    def pco_times(self, sat, t, limit=None):
        """PCO delivery time to every station (UNREACHABLE where none)."""
        k0 = self.index(t)
        k1 = self.num_samples - 1
        if limit is not None:
            k1 = min(k1, int(math.floor((t + limit) / self.step + 1e-9)))
        out = np.full(len(self.stations), UNREACHABLE)
        if k0 > k1 or not self.stations:
            return out
        sub = self.vis[sat, :, k0:k1 + 1]
        has = sub.any(axis=1)
        first = sub.argmax(axis=1)
        out[has] = self.time(first[has] + k0) - t
        return out

    def visible_satellites(self, gs_idx, t):
        return np.nonzero(self.vis[:, gs_idx, self.index(t)])[0]

    def route_entries(self):
        n = self.num_orbits
        return n * n

    def satellite_route_entries(self):
        n = self.grid.size
        return n * n


def build_oan(sats, stations, horizon, step=1, threshold_deg=DEFAULT_ELEVATION_DEG,
              earth_rotation=True, sun_direction=(1.0, 0.0, 0.0), chunk=24):
    if horizon % step:
        raise ConfigurationError("step must divide the horizon")
    grid = Grid.from_satellites(sats)
    times = np.arange(0, horizon + step, step, dtype=float)
    n, g = len(sats), len(stations)
    vis = np.zeros((n, g, len(times)), dtype=bool)
    sunlit = np.zeros((n, len(times)), dtype=bool)
    lat = np.zeros((n, len(times)), dtype=np.float32)
    lon = np.zeros((n, len(times)), dtype=np.float32)
    pos_all = np.zeros((len(times), n, 3), dtype=np.float32)
    gs_pos = station_positions(stations) if stations else np.zeros((0, 3))
    up = gs_pos / EARTH_RADIUS_KM
    sin_th = math.sin(math.radians(threshold_deg))
    for a in range(0, len(times), chunk):
        ts = times[a:a + chunk]
        pos = positions(sats, ts, earth_rotation)
        pos_all[a:a + chunk] = pos
        inertial = positions(sats, ts, False) if earth_rotation else pos
        sunlit[:, a:a + chunk] = sunlit_mask(inertial, sun_direction).T
        la, lo = subpoints(pos)
        lat[:, a:a + chunk] = la.T
        lon[:, a:a + chunk] = lo.T
        if g:
            proj = pos @ up.T  # [T, S, G]
            r2 = np.einsum("tsk,tsk->ts", pos, pos)[:, :, None]
            dist = np.sqrt(r2 + EARTH_RADIUS_KM ** 2 - 2.0 * EARTH_RADIUS_KM * proj)
            vis[:, :, a:a + chunk] = ((proj - EARTH_RADIUS_KM) >= sin_th * dist).transpose(1, 2, 0)
    phase0 = np.radians([s.phase_deg for s in sats])
    rate = 2.0 * np.pi / np.array([s.period_min for s in sats])
    return OanGraph(grid, stations, horizon, step, vis, sunlit, phase0, rate, lat, lon, pos_all,
                    link_capacity=np.array([s.link_capacity for s in sats]),
                    period_min=float(np.mean([s.period_min for s in sats])))


def orbit_hops(graph, src_orbit, dst_orbit):
    n = graph if isinstance(graph, int) else graph.num_orbits
    d = abs(dst_orbit - src_orbit) % n
    return min(d, n - d)


def pco_delivery_time(graph: OanGraph, sat, t, gs_id):
    k = graph.gs_index[gs_id]
    return float(graph.pco_times(sat, t)[k])


def isl_transfer_minutes(volume, hops, link_capacity):
    return hops * volume / link_capacity / 60.0


def delivery_time(plan, graph: OanGraph = None, literal=False):
    """Delivery time D of a plan.

    The default form sums disjoint carry segments, which equals the plan's
    completion.  literal=True sums the PCO time of every carrying satellite
    measured from the start of its carry, which double counts hybrid
    segments that end before their carrier reaches the station.
    """
    if plan.gs_id is None:
        raise ValueError("plan %s has no assigned station" % plan.task_id)
    t = plan.created_at
    if plan.mode == "isl_only":
        cap = graph.link_capacity[plan.isl_path[0]] if graph is not None and plan.isl_path else 1000.0
        return t + isl_transfer_minutes(plan.volume, max(len(plan.isl_path) - 1, 0), cap)
    carriers = [c for c in plan.carry_intervals if c[2] > c[1]]
    if not literal:
        return t + sum(end - start for _, start, end in carriers)
    if graph is None:
        raise ValueError("literal evaluation needs the graph")
    total = t
    for sat, start, _ in carriers:
        total += pco_delivery_time(graph, sat, start, plan.gs_id)
    return total
