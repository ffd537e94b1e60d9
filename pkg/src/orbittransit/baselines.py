"""Comparison strategies: nearest and capacity-aware station selection,
fewest-hop ISL routing and withhold-style PCO delivery.

These are proxies for published systems whose internals are not available;
they share the engine's physical checks but plan with no look-ahead.
"""

from dataclasses import dataclass

import numpy as np

from .constants import EARTH_RADIUS_KM
from .constellation import ConfigurationError
from .scheduler import DeliveryPlan, Mode, SchedulingFailure

SELECTIONS = ("nearest", "nearest_available")
ROUTINGS = ("isl_shortest", "pco_withhold", "orbittransit")


@dataclass(frozen=True)
class StrategyId:
    selection: str = "nearest"
    routing: str = "orbittransit"

    def __post_init__(self):
        if self.selection not in SELECTIONS:
            raise ConfigurationError("unknown selection %r" % self.selection)
        if self.routing not in ROUTINGS:
            raise ConfigurationError("unknown routing %r" % self.routing)

    @property
    def label(self):
        if self.routing == "orbittransit":
            return "orbittransit"
        return "%s+%s" % (self.selection, self.routing)

    @classmethod
    def parse(cls, text):
        if text == "orbittransit":
            return cls("nearest", "orbittransit")
        sel, _, routing = text.partition("+")
        return cls(sel, routing)


def _station_distances(lat, lon, stations):
    la = np.radians(lat)
    lo = np.radians(lon)
    g_la = np.radians([s.latitude_deg for s in stations])
    g_lo = np.radians([s.longitude_deg for s in stations])
    h = (np.sin((g_la - la) / 2) ** 2
         + np.cos(la) * np.cos(g_la) * np.sin((g_lo - lo) / 2) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def station_order(task, oan, tick, stations=None):
    """Station indices by great-circle distance from the origin's sub-point."""
    stations = oan.stations if stations is None else stations
    k = oan.index(tick)
    dist = _station_distances(float(oan.lat[task.origin_satellite, k]),
                              float(oan.lon[task.origin_satellite, k]), stations)
    idx = np.arange(len(stations))
    ids = np.array([s.id for s in stations])
    return idx[np.lexsort((ids, dist))], dist


def select_nearest(task, oan, tick, stations=None):
    """Nearest station to the origin's sub-point, with no capacity check."""
    order, _ = station_order(task, oan, tick, stations)
    stations = oan.stations if stations is None else stations
    return stations[int(order[0])].id


def select_nearest_available(task, oan, tick, load, capacity, bucket_of, stations=None):
    """Nearest station whose offload bucket admits the task.

    load[g, k] is the committed volume, capacity[g] the bucket size and
    bucket_of(g) the predicted offload tick (None if the station is out of
    reach).
    """
    order, _ = station_order(task, oan, tick, stations)
    stations = oan.stations if stations is None else stations
    for g in order:
        k = bucket_of(int(g))
        if k is None:
            continue
        if load[g, k] + task.volume <= capacity[g] + 1e-6:
            return stations[int(g)].id
    raise SchedulingFailure("gs_congestion", "no station with room for task %d" % task.id)


def route_isl_shortest(task, gs_id, oan, tick, holder=None, allowed=None):
    """Fewest-hop +Grid path to a satellite currently linked to the station.

    Returns an isl_only plan, or None when no satellite sees the station.
    Zero hops is the bent-pipe case.
    """
    g = oan.gs_index[gs_id]
    k = oan.index(tick)
    src = task.origin_satellite if holder is None else holder
    targets = np.nonzero(oan.vis[:, g, k])[0]
    if allowed is not None:
        targets = targets[allowed[targets]]
    if len(targets) == 0:
        return None
    grid = oan.grid
    hops = grid.hops(src, targets)
    best = targets[np.lexsort((targets, hops))[0]]
    path = grid.bfs_path(src, [int(best)], allowed)
    if path is None:
        return None
    return DeliveryPlan(task.id, Mode.ISL_ONLY, gs_id, tuple(path), float(tick), [],
                        (src, k), (path[-1], k), float(tick), task.created_at, task.volume,
                        task.origin_satellite, task.due)


def next_window(oan, sat, g, k_from, k_to):
    """First tick in [k_from, k_to] at which sat sees station index g."""
    if k_from > k_to:
        return None
    row = oan.vis[sat, g, k_from:k_to + 1]
    if not row.any():
        return None
    return k_from + int(row.argmax())


def route_pco_withhold(task, gs_id, oan, tick, admits=None):
    """Carry on the origin satellite to the first window of the station whose
    bucket admits the task (admits(k) -> bool), withholding across passes.

    Never uses an ISL.  Raises SchedulingFailure("timeout") when no window
    before the deadline works.
    """
    g = oan.gs_index[gs_id]
    sat = task.origin_satellite
    k = oan.index(tick)
    due = min(int(np.floor(task.due / oan.step + 1e-9)), oan.num_samples - 1)
    while True:
        k = next_window(oan, sat, g, k, due)
        if k is None:
            raise SchedulingFailure("timeout", "task %d misses its deadline" % task.id)
        if admits is None or admits(k):
            break
        k += 1
    t0 = oan.index(tick)
    carry = [(sat, t0, k)] if k > t0 else []
    return DeliveryPlan(task.id, Mode.PCO_ONLY, gs_id, (), None, carry, (sat, t0), (sat, k),
                        float(oan.time(k)), task.created_at, task.volume, sat, task.due)
