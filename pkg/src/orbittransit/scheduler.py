"""OrbitTransit scheduling: traffic diffusion and contention-avoidant delivery.

All times inside the scheduler are integer ticks; with the default one
minute tick they coincide with minutes.  The ledger holds every committed
use of station buckets, satellite transmit capacity and recorder space, and
the battery floor is checked by projecting each satellite's level under its
committed spends and its known sunlight schedule.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import flow
from .energy import EnergyParams, project_levels
from .oan import UNREACHABLE, OanGraph, isl_transfer_minutes

FAILURE_REASONS = ("timeout", "gs_congestion", "storage_overflow", "satellite_outage",
                   "energy_depleted")

# internal check results mapped onto reported failure reasons
_REASON = {"gs": "gs_congestion", "storage": "storage_overflow", "energy": "energy_depleted",
           "tx": "gs_congestion", "outage": "satellite_outage", "deadline": "timeout"}


class Mode(str, Enum):
    PCO_ONLY = "pco_only"
    HYBRID = "hybrid"
    ISL_ONLY = "isl_only"


class SchedulingFailure(Exception):
    def __init__(self, reason, message=""):
        self.reason = reason
        super().__init__(message or reason)


@dataclass(frozen=True)
class Assignment:
    task_id: int
    gs_id: int
    orbit_offset: int
    decided_at: float


@dataclass
class DeliveryPlan:
    task_id: int
    mode: Mode
    gs_id: int = None
    isl_path: tuple = ()
    isl_start: float = None
    carry_intervals: list = field(default_factory=list)
    pickup: tuple = None  # (sat, tick)
    offload: tuple = None  # (sat, tick)
    completion: float = UNREACHABLE
    created_at: float = 0.0
    volume: float = 0.0
    origin: int = -1
    due: float = UNREACHABLE
    orbit_offset: int = 0
    status: str = "planned"
    reason: str = None
    fallback: bool = False
    fragment: int = 0

    @property
    def gsl_events(self):
        return [e for e in (self.pickup, self.offload) if e is not None]

    @property
    def isl_hops(self):
        return max(len(self.isl_path) - 1, 0)

    def to_record(self):
        return {
            "task_id": self.task_id, "fragment": self.fragment, "mode": self.mode.value,
            "gs": self.gs_id, "path": list(self.isl_path), "t_isl": self.isl_start,
            "intervals": [list(c) for c in self.carry_intervals],
            "gsl_events": [list(e) for e in self.gsl_events],
            "completion": None if math.isinf(self.completion) else self.completion,
            "status": self.status, "reason": self.reason, "fallback": self.fallback,
        }


def failed_plan(task, reason):
    return DeliveryPlan(task.id, Mode.ISL_ONLY, None, created_at=task.created_at,
                        volume=task.volume, origin=task.origin_satellite, due=task.due,
                        status="failed", reason=_REASON.get(reason, reason))


@dataclass
class SchedulerConfig:
    energy: EnergyParams = field(default_factory=EnergyParams)
    dt: float = 1.0
    max_offset: int = None
    candidate_cap: int = 30
    # plan evaluations allowed per task before diffusion gives up on it
    probe_budget: int = 150
    gs_order: str = "pco"  # or "distance"
    cumulative_load: bool = False
    use_flow: bool = True
    max_fragments: int = 4
    handoff_radius: int = 4
    defer_window: int = 10
    # restrict hybrid crossings to these ticks (None: every tick)
    isl_slots: tuple = None


@dataclass
class Usage:
    """Resources a plan consumes: unique (sat, tick) transmissions, carry
    intervals [a, b) and the station bucket of its offload."""
    volume: float
    tx: tuple = ()
    store: tuple = ()
    gs: tuple = None  # (station index, tick)

    def satellites(self):
        out = {s for s, _ in self.tx}
        out.update(s for s, _, _ in self.store)
        return sorted(out)


def plan_usage(plan: DeliveryPlan, oan: OanGraph, dt=1.0, from_tick=None):
    """Resource usage of a plan, optionally restricted to ticks >= from_tick."""
    d = plan.volume
    tx = set()
    if plan.pickup is not None:
        tx.add((plan.pickup[0], int(plan.pickup[1])))
    if plan.isl_path and plan.isl_start is not None:
        for s in plan.isl_path:
            tx.add((s, int(plan.isl_start)))
    if plan.offload is not None:
        tx.add((plan.offload[0], int(plan.offload[1])))
    store = [(s, int(a), int(b)) for s, a, b in plan.carry_intervals if b > a]
    gs = None
    if plan.offload is not None and plan.gs_id is not None:
        gs = (oan.gs_index[plan.gs_id], int(plan.offload[1]))
    if from_tick is not None:
        tx = {(s, k) for s, k in tx if k >= from_tick}
        store = [(s, max(a, from_tick), b) for s, a, b in store if b > from_tick]
        if gs is not None and gs[1] < from_tick:
            gs = None
    return Usage(d, tuple(sorted(tx)), tuple(store), gs)


class Ledger:
    """Committed resource usage per station bucket and per satellite tick."""

    def __init__(self, oan: OanGraph, energy: EnergyParams, storage_capacity, dt=1.0,
                 cumulative_load=False):
        n, g, k = oan.grid.size, len(oan.stations), oan.num_samples
        self.oan = oan
        self.energy = energy
        self.dt = dt
        self.cumulative = cumulative_load
        self.gs_commit = np.zeros((g, k))
        self.tx_commit = np.zeros((n, k))
        self.store_commit = np.zeros((n, k))
        self.gs_cap = np.array([s.capacity for s in oan.stations]) * 60.0 * dt
        self.tx_cap = oan.link_capacity * 60.0 * dt
        self.store_cap = np.broadcast_to(np.asarray(storage_capacity, dtype=float), (n,)).copy()
        self.last_spend = np.full(n, -1, dtype=np.int64)
        self.gain = np.where(oan.sunlit, energy.solar_power * dt, 0.0)
        self.log = {}  # (kind, idx) -> [(decided_at, a, b, delta)]
        self.keep_log = False

    @property
    def horizon_ticks(self):
        return self.tx_commit.shape[1]

    def apply(self, usage: Usage, sign=1, decided_at=0):
        d = sign * usage.volume
        for s, k in usage.tx:
            self.tx_commit[s, k] += d
            self._log("tx", s, k, k + 1, d, decided_at)
            if sign > 0:
                self.last_spend[s] = max(self.last_spend[s], k)
        for s, a, b in usage.store:
            self.store_commit[s, a:b] += d
            self._log("store", s, a, b, d, decided_at)
            if sign > 0:
                self.last_spend[s] = max(self.last_spend[s], b - 1)
        if usage.gs is not None:
            g, k = usage.gs
            self.gs_commit[g, k] += d
            self._log("gs", g, k, k + 1, d, decided_at)

    def _log(self, kind, idx, a, b, d, decided_at):
        if self.keep_log:
            self.log.setdefault((kind, idx), []).append((decided_at, a, b, d))

    def prune_log(self, before):
        for key in list(self.log):
            entries = [e for e in self.log[key] if e[0] >= before]
            if entries:
                self.log[key] = entries
            else:
                del self.log[key]

    def gs_ok(self, row_value, g, d, row=None):
        if self.cumulative and row is not None:
            return row.sum() + d <= self.gs_cap[g] + 1e-6
        return row_value + d <= self.gs_cap[g] + 1e-6

    def energy_ok(self, sat, t0, extra, level, commit_view=None):
        """Projected level of sat stays at or above the floor.

        extra maps tick -> additional spend (Wmin); level is the charge at
        the start of tick t0.
        """
        p = self.energy
        end = max(self.last_spend[sat] + 1, max(extra) + 1 if extra else t0 + 1, t0 + 1)
        end = min(end, self.horizon_ticks)
        tx = self.tx_commit[sat, t0:end] if commit_view is None else commit_view[0]
        st = self.store_commit[sat, t0:end] if commit_view is None else commit_view[1]
        spends = p.kappa * tx + p.zeta * st
        for k, v in extra.items():
            if t0 <= k < end:
                spends[k - t0] += v
        traj = project_levels(level, self.gain[sat, t0:end], spends, p.battery_max)
        return traj.min() >= p.floor - 1e-9

    def can_afford(self, sat, t0, t1, spend, level):
        """Necessary condition: some tick in [t0, t1] leaves room for spend."""
        p = self.energy
        end = min(max(self.last_spend[sat] + 1, t1 + 1), self.horizon_ticks)
        t1 = min(t1, end - 1)
        if t1 < t0:
            return False
        spends = p.kappa * self.tx_commit[sat, t0:end] + p.zeta * self.store_commit[sat, t0:end]
        traj = project_levels(level, self.gain[sat, t0:end], spends, p.battery_max)
        start = np.concatenate(([level], traj[:t1 - t0]))
        room = np.minimum(start + self.gain[sat, t0:t1 + 1], p.battery_max)
        return bool((room - spend >= p.floor - 1e-9).any())

    def fits(self, usage: Usage, view, t0, failed=None):
        """None if usage fits against the given view, else (reason, satellite)."""
        d = usage.volume
        if failed is not None:
            for s in usage.satellites():
                if failed[s]:
                    return "outage", s
        if usage.gs is not None:
            g, k = usage.gs
            if self.cumulative:
                if view.gs_row(g, 0, self.horizon_ticks).sum() + d > self.gs_cap[g] + 1e-6:
                    return "gs", None
            elif view.gs_row(g, k, k + 1)[0] + d > self.gs_cap[g] + 1e-6:
                return "gs", None
        for s, k in usage.tx:
            if view.tx_row(s, k, k + 1)[0] + d > self.tx_cap[s] + 1e-6:
                return "tx", s
        for s, a, b in usage.store:
            if view.store_row(s, a, b).max() + d > self.store_cap[s] + 1e-6:
                return "storage", s
        p = self.energy
        extra = {}
        for s, k in usage.tx:
            extra.setdefault(s, {})
            extra[s][k] = extra[s].get(k, 0.0) + p.kappa * d
        for s, a, b in usage.store:
            e = extra.setdefault(s, {})
            for k in range(a, b):
                e[k] = e.get(k, 0.0) + p.zeta * d
        for s in sorted(extra):
            if not self.energy_ok(s, t0, extra[s], view.level(s)):
                return "energy", s
        return None


class RealView:
    """Current ledger and battery state without telemetry delay."""

    def __init__(self, ledger: Ledger, levels):
        self.ledger = ledger
        self._levels = levels

    def set_levels(self, levels):
        self._levels = levels

    def level(self, sat):
        return float(self._levels[sat])

    def levels(self):
        return self._levels

    def gs_row(self, g, a, b):
        return self.ledger.gs_commit[g, a:b]

    def tx_row(self, s, a, b):
        return self.ledger.tx_commit[s, a:b]

    def store_row(self, s, a, b):
        return self.ledger.store_commit[s, a:b]

    def gs_col(self, k):
        return self.ledger.gs_commit[:, k]

    def tx_col(self, k):
        return self.ledger.tx_commit[:, k]


def offset_order(max_offset):
    yield 0
    for m in range(1, max_offset + 1):
        yield m
        yield -m


@dataclass
class _Probe:
    task: object
    holder: int
    t: int
    due: int
    pickup: bool
    reasons: list = field(default_factory=list)
    stale: bool = False
    budget: int = 150


class Scheduler:
    """OrbitTransit control plane over one OanGraph and Ledger."""

    def __init__(self, oan: OanGraph, ledger: Ledger, config: SchedulerConfig = None, view=None):
        self.oan = oan
        self.ledger = ledger
        self.cfg = config or SchedulerConfig()
        self.view = view
        # when planning from delayed telemetry, plans are checked against
        # this real-time view before commit
        self.real_view = None
        self.fallbacks = set()
        self.failed = np.zeros(oan.grid.size, dtype=bool)
        self.gs_down = {}  # station index -> first tick it is back
        n_orb = oan.num_orbits
        self.max_offset = self.cfg.max_offset if self.cfg.max_offset is not None else n_orb // 2
        self.max_offset = min(self.max_offset, n_orb // 2)
        self._vis_cache = (None, None)
        self.last_network = None
        self.stats = {"flow_solves": 0, "flow_fallbacks": 0}

    # -- helpers ----------------------------------------------------------

    def tick_of(self, minutes):
        return int(round(minutes / self.cfg.dt))

    def minutes(self, tick):
        return tick * self.cfg.dt

    def _due_tick(self, due_minutes):
        return min(int(math.floor(due_minutes / self.cfg.dt + 1e-9)), self.oan.num_samples - 1)

    def _vis_at(self, k):
        if self._vis_cache[0] != k:
            self._vis_cache = (k, np.ascontiguousarray(self.oan.vis[:, :, k]))
        return self._vis_cache[1]

    def _gs_available(self, g, k):
        return self.gs_down.get(g, -1) <= k

    def _offload_slot(self, sat, g, k_from, k_to, d):
        """First tick in [k_from, k_to] where sat sees g and both the satellite
        transmitter and the station bucket have room (per the view)."""
        if k_from > k_to:
            return None
        vis = self.oan.vis[sat, g, k_from:k_to + 1]
        if not vis.any():
            return None
        v = self.view
        ok = vis & (v.tx_row(sat, k_from, k_to + 1) + d <= self.ledger.tx_cap[sat] + 1e-6)
        gs_row = v.gs_row(g, k_from, k_to + 1)
        if self.ledger.cumulative:
            if v.gs_row(g, 0, self.ledger.horizon_ticks).sum() + d > self.ledger.gs_cap[g] + 1e-6:
                return None
        else:
            ok &= gs_row + d <= self.ledger.gs_cap[g] + 1e-6
        down = self.gs_down.get(g, -1)
        if down > k_from:
            ok[:down - k_from] = False
        if not ok.any():
            return None
        return k_from + int(ok.argmax())

    def _station_order(self, sat, t, O):
        cand = np.nonzero(O <= np.inf)[0]
        if self.cfg.gs_order == "distance" and self.oan.pos is not None:
            from .topology import station_positions
            if not hasattr(self, "_gs_pos"):
                self._gs_pos = station_positions(self.oan.stations)
            dist = np.linalg.norm(self._gs_pos[cand] - self.oan.pos[t, sat], axis=-1)
            return cand[np.lexsort((cand, dist))]
        return cand[np.lexsort((cand, O[cand]))]

    def _slots(self, t, D):
        hi = min(D, t + self.cfg.candidate_cap - 1)
        if self.cfg.isl_slots is None:
            return range(t, hi + 1)
        return [s for s in sorted(self.cfg.isl_slots) if t <= s <= hi]

    def _path(self, src, delta):
        """Inter-orbit chain from src across delta planes, same in-plane slot."""
        step = 1 if delta > 0 else -1
        return tuple(self.oan.counterpart(src, step * j) for j in range(abs(delta) + 1))

    # -- plan construction ------------------------------------------------

    def _make_plan(self, probe: _Probe, mode, g, delta, path=(), s=None, D=None, isl_k=None):
        task = probe.task
        t, dt = probe.t, self.cfg.dt
        gs_id = self.oan.stations[g].id
        pickup = (probe.holder, t) if probe.pickup else None
        if mode == Mode.PCO_ONLY:
            carry = [(probe.holder, t, D)] if D > t else []
            plan = DeliveryPlan(task.id, mode, gs_id, (), None, carry, pickup, (probe.holder, D),
                                self.minutes(D), task.created_at, task.volume,
                                task.origin_satellite, task.due, 0)
        elif mode == Mode.HYBRID:
            tail = path[-1]
            carry = []
            if s > t:
                carry.append((probe.holder, t, s))
            if D > s:
                carry.append((tail, s, D))
            plan = DeliveryPlan(task.id, mode, gs_id, tuple(path), self.minutes(s), carry, pickup,
                                (tail, D), self.minutes(D), task.created_at, task.volume,
                                task.origin_satellite, task.due, delta)
        else:
            hops = len(path) - 1
            done = self.minutes(isl_k) + isl_transfer_minutes(
                task.volume, hops, float(self.oan.link_capacity[path[0]]))
            plan = DeliveryPlan(task.id, mode, gs_id, tuple(path), self.minutes(isl_k), [],
                                pickup, (path[-1], isl_k), done, task.created_at, task.volume,
                                task.origin_satellite, task.due, 0)
        return plan

    def _fits(self, plan, t0, probe=None):
        if probe is not None:
            probe.budget -= 1
        usage = plan_usage(plan, self.oan, self.cfg.dt)
        return usage, self.ledger.fits(usage, self.view, t0, self.failed)

    def _try_station(self, probe: _Probe, delta, g, O_g):
        """Plan for probe via counterpart orbit delta and station g, or a reason."""
        d = probe.task.volume
        src = probe.holder
        path = self._path(src, delta) if delta else (src,)
        if any(self.failed[s] for s in path):
            return None, "outage"
        tail = path[-1]
        k_from = probe.t + int(math.ceil(O_g / self.cfg.dt - 1e-9))
        D = self._offload_slot(tail, g, k_from, probe.due, d)
        if D is None:
            return None, "gs"
        if delta == 0:
            # a later slot can clear the energy floor (more solar gain before
            # the offload); other failures only get worse with a longer carry
            while True:
                plan = self._make_plan(probe, Mode.PCO_ONLY, g, 0, D=D)
                _, bad = self._fits(plan, probe.t, probe)
                if bad is None:
                    return plan, None
                if bad[0] != "energy" or probe.budget <= 0:
                    return None, bad[0]
                D = self._offload_slot(tail, g, D + 1, probe.due, d)
                if D is None:
                    return None, "energy"
        last = None
        for s in self._slots(probe.t, D):
            if probe.budget <= 0:
                break
            plan = self._make_plan(probe, Mode.HYBRID, g, delta, path, s, D)
            _, bad = self._fits(plan, probe.t, probe)
            if bad is None:
                return plan, None
            last = bad[0]
            if bad[0] in ("gs", "outage"):
                break
        return None, last or "deadline"

    def _probe_offset(self, probe: _Probe, delta):
        if probe.budget <= 0:
            return None
        src = probe.holder
        c = self.oan.counterpart(src, delta) if delta else src
        if delta:
            # every relay and the tail must be able to afford one transmission
            e = self.ledger.energy.kappa * probe.task.volume
            for s in self._path(src, delta)[1:]:
                if self.failed[s] or not self.ledger.can_afford(s, probe.t, probe.due, e,
                                                                self.view.level(s)):
                    probe.reasons.append("energy" if not self.failed[s] else "outage")
                    return None
        limit = self.minutes(probe.due - probe.t)
        O = self.oan.pco_times(c, self.minutes(probe.t), limit)
        if not np.isfinite(O).any():
            return None
        for g in self._station_order(c, probe.t, O):
            if not np.isfinite(O[g]) or probe.budget <= 0:
                continue
            plan, why = self._try_station(probe, delta, int(g), O[g])
            if plan is not None:
                return plan
            probe.reasons.append(why)
        return None

    def _plan_isl(self, probe: _Probe, gs_idx=None):
        """Fewest-hop ISL delivery at the probe tick to a visible station."""
        d = probe.task.volume
        k = probe.t
        v = self.view
        lg = self.ledger
        p = self.ledger.energy
        if self.failed[probe.holder]:
            return None, "outage"
        levels = np.asarray(v.levels())
        allowed = (~self.failed) & (levels - p.floor - p.kappa * d >= -1e-9)
        allowed &= v.tx_col(k) + d <= lg.tx_cap + 1e-6
        allowed[probe.holder] = True
        gs_free = v.gs_col(k) + d <= lg.gs_cap + 1e-6
        if lg.cumulative:
            gs_free = lg.gs_commit.sum(axis=1) + d <= lg.gs_cap + 1e-6
        for g, until in self.gs_down.items():
            if until > k:
                gs_free[g] = False
        if gs_idx is not None:
            only = np.zeros_like(gs_free)
            only[gs_idx] = gs_free[gs_idx]
            gs_free = only
        vis = self._vis_at(k)
        seen = vis & gs_free[None, :]
        targets = np.nonzero(seen.any(axis=1) & allowed)[0]
        if len(targets) == 0:
            return None, "gs"
        why = "energy"
        for _ in range(6):
            path = self.oan.grid.bfs_path(probe.holder, targets, allowed)
            if path is None:
                return None, why
            g = int(np.nonzero(seen[path[-1]])[0][0])
            plan = self._make_plan(probe, Mode.ISL_ONLY, g, 0, path=path, isl_k=k)
            if plan.completion > probe.task.due + 1e-9:
                return None, "deadline"
            _, bad = self._fits(plan, k)
            if bad is None:
                return plan, None
            why, sat = bad
            if sat is None or sat == probe.holder:
                return None, why
            allowed[sat] = False
            targets = targets[targets != sat]
        return None, why

    def _real_ok(self, plan, t):
        if self.real_view is None or self.real_view is self.view:
            return True
        usage = plan_usage(plan, self.oan, self.cfg.dt)
        return self.ledger.fits(usage, self.real_view, t, self.failed) is None

    def _plan_isl_real(self, probe):
        saved = self.view
        if self.real_view is not None:
            self.view = self.real_view
        try:
            return self._plan_isl(probe)
        finally:
            self.view = saved

    def _commit(self, plan, decided_at):
        usage = plan_usage(plan, self.oan, self.cfg.dt)
        self.ledger.apply(usage, +1, decided_at)
        return usage

    def release(self, plan, from_tick, decided_at=None):
        usage = plan_usage(plan, self.oan, self.cfg.dt, from_tick=from_tick)
        self.ledger.apply(usage, -1, from_tick if decided_at is None else decided_at)

    # -- traffic diffusion ------------------------------------------------

    def diffuse_traffic(self, tasks, decided_at=None):
        """Assign tasks to stations, widening the orbit offset step by step.

        Returns (assignments, plans, unassigned) where plans holds the
        committed plan of every assigned task.
        """
        probes = []
        for task in sorted(tasks, key=lambda x: x.id):
            probes.append(_Probe(task, task.origin_satellite, self.tick_of(task.created_at),
                                 self._due_tick(task.due), True))
        return self._diffuse(probes, decided_at)

    def _diffuse(self, probes, decided_at=None):
        assignments, plans = {}, {}
        for pr in probes:
            pr.budget = self.cfg.probe_budget
        working = list(probes)
        stale = []
        for delta in offset_order(self.max_offset):
            if not working:
                break
            left = []
            for pr in working:
                plan = self._probe_offset(pr, delta)
                if plan is None:
                    left.append(pr)
                    continue
                if not self._real_ok(plan, pr.t):
                    pr.stale = True
                    stale.append(pr)
                    continue
                self._commit(plan, pr.t if decided_at is None else decided_at)
                plans[pr.task.id] = plan
                assignments[pr.task.id] = Assignment(pr.task.id, plan.gs_id, delta,
                                                     self.minutes(pr.t))
            working = left
        return assignments, plans, working + stale

    # -- delivery planning ------------------------------------------------

    def plan_delivery(self, task, assignment: Assignment, pickup=True):
        """Plan one task for a given station and orbit offset (not committed)."""
        probe = _Probe(task, task.origin_satellite, self.tick_of(task.created_at),
                       self._due_tick(task.due), pickup)
        g = self.oan.gs_index[assignment.gs_id]
        c = self.oan.counterpart(probe.holder, assignment.orbit_offset)
        O = self.oan.pco_times(c, task.created_at, task.deadline)[g]
        if np.isfinite(O):
            plan, why = self._try_station(probe, assignment.orbit_offset, g, O)
            if plan is not None:
                return plan
        plan, why = self._plan_isl(probe, g)
        if plan is None:
            plan, why = self._plan_isl(probe)
        if plan is None:
            raise SchedulingFailure(_REASON.get(why, why))
        return plan

    def _hybrid_candidates(self, plan, probe_t):
        """Individually feasible crossing slots for a committed hybrid plan."""
        out = []
        D = self.tick_of(plan.completion)
        t = probe_t
        for s in self._slots(t, D):
            trial = self._retime(plan, s)
            _, bad = self._fits(trial, t)
            if bad is None:
                out.append((s, D))
        return out

    def _retime(self, plan, s):
        t = self.tick_of(plan.created_at) if plan.pickup else int(plan.carry_intervals[0][1])
        D = self.tick_of(plan.completion)
        src, tail = plan.isl_path[0], plan.isl_path[-1]
        carry = []
        if s > t:
            carry.append((src, t, s))
        if D > s:
            carry.append((tail, s, D))
        return DeliveryPlan(plan.task_id, plan.mode, plan.gs_id, plan.isl_path, self.minutes(s),
                            carry, plan.pickup, plan.offload, plan.completion, plan.created_at,
                            plan.volume, plan.origin, plan.due, plan.orbit_offset)

    def solve_tisl(self, hybrids, t):
        """Jointly re-choose t_isl for this epoch's hybrid plans.

        The plans are committed on entry; their crossing-dependent usage is
        released, the network solved, and the chosen plans committed.
        """
        if not hybrids:
            return hybrids
        earliest = all(p.isl_start == self.minutes(t) for p in hybrids)
        if earliest or not self.cfg.use_flow:
            return hybrids
        for p in hybrids:
            self.ledger.apply(plan_usage(p, self.oan, self.cfg.dt), -1, t)
        requests = []
        for p in hybrids:
            cands = self._hybrid_candidates(p, t)
            requests.append(flow.HybridRequest(p.task_id, p.isl_path[0], p.isl_path[-1], t,
                                               cands, p.isl_path, p.volume))
        unit = max(p.volume for p in hybrids)
        caps = {}
        txcap = {}
        hi = max([d for r in requests for _, d in r.candidates] + [t + 1])
        hi = min(hi + 1, self.ledger.horizon_ticks)
        for r in requests:
            for sat in (r.source, r.tail):
                if sat in caps:
                    continue
                free = (self.ledger.store_cap[sat] - self.view.store_row(sat, t, hi)) // unit
                caps[sat] = (t, free.astype(int))
            for s, _ in r.candidates:
                for sat in (r.source, r.tail):
                    free = (self.ledger.tx_cap[sat] - self.view.tx_row(sat, s, s + 1)[0]) // unit
                    txcap[(sat, s)] = int(free)
        net = flow.build_network(requests, caps, txcap)
        sol = flow.solve(net)
        self.last_network = net
        self.stats["flow_solves"] += 1
        out = []
        for p in hybrids:
            chosen = None
            if p.task_id in sol.t_isl:
                trial = self._retime(p, sol.t_isl[p.task_id])
                if self._fits(trial, t)[1] is None:
                    chosen = trial
            if chosen is None:
                self.stats["flow_fallbacks"] += 1
                for s, _ in next(r.candidates for r in requests if r.task_id == p.task_id):
                    trial = self._retime(p, s)
                    if self._fits(trial, t)[1] is None:
                        chosen = trial
                        break
            if chosen is not None and not self._real_ok(chosen, t):
                chosen = None
            if chosen is None:
                if self._fits(p, t)[1] is None and self._real_ok(p, t):
                    chosen = p
            if chosen is None:
                out.append(None)
                continue
            self._commit(chosen, t)
            out.append(chosen)
        return out

    def schedule_epoch(self, tasks):
        """Plan every task created at one tick; failures carry a reason."""
        if not tasks:
            return []
        t = self.tick_of(tasks[0].created_at)
        probes = [_Probe(task, task.origin_satellite, self.tick_of(task.created_at),
                         self._due_tick(task.due), True) for task in sorted(tasks, key=lambda x: x.id)]
        results = {}
        live = []
        for pr in probes:
            why = self._origin_check(pr)
            if why is not None:
                results[pr.task.id] = failed_plan(pr.task, why)
            else:
                live.append(pr)
        _, plans, unassigned = self._diffuse(live)
        hybrids = [p for p in plans.values() if p.mode == Mode.HYBRID]
        retimed = self.solve_tisl(hybrids, t)
        for old, new in zip(hybrids, retimed):
            if new is None:
                del plans[old.task_id]
                unassigned.append(next(pr for pr in live if pr.task.id == old.task_id))
            else:
                plans[old.task_id] = new
        results.update(plans)
        for pr in sorted(unassigned, key=lambda x: x.task.id):
            plan, why = self._plan_isl(pr) if not pr.stale else (None, None)
            if plan is not None and not self._real_ok(plan, pr.t):
                pr.stale = True
                plan = None
            delayed = self.real_view is not None and self.real_view is not self.view
            if plan is None and delayed:
                # stale telemetry may have hidden a feasible plan as well
                pr.stale = True
            if pr.stale:
                plan, why = self._plan_isl_real(pr)
                if plan is None and delayed:
                    plan = self._diffuse_real(pr)
                if plan is not None:
                    plan.fallback = True
                    self.fallbacks.add(pr.task.id)
                    if plan.mode != Mode.ISL_ONLY:
                        results[pr.task.id] = plan
                        continue
            if plan is not None:
                self._commit(plan, pr.t)
                results[pr.task.id] = plan
            else:
                results[pr.task.id] = failed_plan(pr.task, self._explain(pr, why))
        return [results[task.id] for task in sorted(tasks, key=lambda x: x.id)]

    def _diffuse_real(self, pr):
        """Last resort for a stale probe: full diffusion on real-time state.
        The returned plan is already committed."""
        saved = self.view
        self.view = self.real_view
        try:
            probe = _Probe(pr.task, pr.holder, pr.t, pr.due, pr.pickup)
            _, plans, _ = self._diffuse([probe])
        finally:
            self.view = saved
        return plans.get(pr.task.id)

    def _origin_check(self, pr):
        if self.failed[pr.holder]:
            return "outage"
        p = self.ledger.energy
        extra = {pr.t: p.kappa * pr.task.volume}
        if self.ledger.energy_ok(pr.holder, pr.t, extra, self.view.level(pr.holder)):
            return None
        if self.real_view is not None and self.real_view is not self.view:
            if self.ledger.energy_ok(pr.holder, pr.t, extra, self.real_view.level(pr.holder)):
                pr.stale = True
                return None
        return "energy"

    @staticmethod
    def _explain(pr, why):
        for r in ("storage", "energy", "gs"):
            if r in pr.reasons:
                return r
        return why if why in ("storage", "energy", "outage") else "deadline"

    # -- re-planning ------------------------------------------------------

    def plan_from(self, task, holder, t, due_minutes, volume=None, escalate=True):
        """Contention-avoidant delivery for data already held by `holder`.

        Used after faults, deferrals and urgency changes; the returned plan
        is committed.  Raises SchedulingFailure when nothing fits.
        """
        from .tasking import Task
        vol = task.volume if volume is None else volume
        due = min(due_minutes, task.due) if escalate else due_minutes
        virtual = Task(task.id, task.origin_satellite, vol, max(due - task.created_at, 1e-9),
                       task.created_at, task.urgency)
        probe = _Probe(virtual, holder, t, self._due_tick(due), False)
        _, plans, left = self._diffuse([probe])
        if plans:
            return plans[task.id]
        plan, why = self._plan_isl_real(probe) if probe.stale else self._plan_isl(probe)
        if plan is not None and not self._real_ok(plan, t):
            plan, why = self._plan_isl_real(probe)
        if plan is None:
            raise SchedulingFailure(_REASON.get(self._explain(probe, why), why))
        plan.fallback = True
        self._commit(plan, t)
        return plan

    def replan_on_failure(self, plan: DeliveryPlan, failed_satellite, t, volume=None):
        """Hand data off a failing satellite; returns a list of plans.

        The failing satellite transmits once at the onset tick.  The nearest
        satellite with room continues to the same station; without one the
        data is split over up to max_fragments relays; a continuation that
        misses the deadline escalates to ISL-only delivery.
        """
        vol = plan.volume if volume is None else volume
        g = self.oan.gs_index[plan.gs_id] if plan.gs_id is not None else None
        due_k = self._due_tick(plan.due)
        grid = self.oan.grid
        order = self._nearby(failed_satellite, self.cfg.handoff_radius)
        v = self.view
        free = {}
        for sat in order:
            free[sat] = self.ledger.store_cap[sat] - v.store_row(sat, t, min(due_k + 1, self.ledger.horizon_ticks)).max()
        single = [s for s in order if free[s] >= vol]
        base = dict(task_id=plan.task_id, created_at=plan.created_at, origin=plan.origin,
                    due=plan.due)
        for sat in single:
            cont = self._handoff(failed_satellite, sat, g, t, due_k, vol, base, plan.fragment)
            if cont is not None:
                self._commit(cont, t)
                return [cont]
            break
        if not single:
            frags = self._fragment(failed_satellite, order, free, g, t, due_k, vol, base)
            if frags:
                return frags
        return [self._escalate(failed_satellite, t, vol, base, plan.fragment)]

    def _nearby(self, sat, radius):
        grid = self.oan.grid
        seen = {sat: 0}
        frontier = [sat]
        out = []
        for depth in range(1, radius + 1):
            nxt = []
            for u in frontier:
                for w in grid.neighbors(u):
                    if w in seen or self.failed[w]:
                        continue
                    seen[w] = depth
                    nxt.append(w)
            nxt.sort()
            out.extend(nxt)
            frontier = nxt
        return out

    def _handoff(self, failed_sat, relay, g, t, due_k, vol, base, fragment):
        path = self.oan.grid.bfs_path(failed_sat, [relay], ~self.failed | (np.arange(len(self.failed)) == failed_sat))
        if path is None or g is None:
            return None
        k_from = t
        D = self._offload_slot(relay, g, k_from, due_k, vol)
        if D is None:
            return None
        carry = [(relay, t, D)] if D > t else []
        cont = DeliveryPlan(base["task_id"], Mode.HYBRID, self.oan.stations[g].id, tuple(path),
                            self.minutes(t), carry, None, (relay, D), self.minutes(D),
                            base["created_at"], vol, base["origin"], base["due"], 0,
                            fragment=fragment)
        saved = self.failed[failed_sat]
        self.failed[failed_sat] = False
        _, bad = self._fits(cont, t)
        self.failed[failed_sat] = saved
        return cont if bad is None else None

    def _fragment(self, failed_sat, order, free, g, t, due_k, vol, base):
        for pieces in range(2, self.cfg.max_fragments + 1):
            size = vol / pieces
            relays = [s for s in order if free[s] >= size]
            if len(relays) < pieces:
                continue
            chosen = []
            for sat in relays:
                cont = self._handoff(failed_sat, sat, g, t, due_k, size, base, len(chosen))
                if cont is None:
                    continue
                self._commit(cont, t)
                chosen.append(cont)
                if len(chosen) == pieces:
                    return chosen
            for c in chosen:
                self.release(c, t)
        return []

    def _escalate(self, failed_sat, t, vol, base, fragment):
        from .tasking import Task
        virtual = Task(base["task_id"], base["origin"], vol,
                       max(base["due"] - base["created_at"], 1e-9), base["created_at"])
        probe = _Probe(virtual, failed_sat, t, self._due_tick(base["due"]), False)
        saved = self.failed[failed_sat]
        self.failed[failed_sat] = False
        allowed_relay = self.failed.copy()
        try:
            plan, why = self._plan_isl(probe)
        finally:
            self.failed[failed_sat] = saved
        if plan is None:
            raise SchedulingFailure("satellite_outage")
        plan.fallback = True
        plan.fragment = fragment
        self._commit(plan, t)
        return plan

    def defer_offload(self, plan: DeliveryPlan, gs_unavailable_until, t, task=None):
        """Shift a blocked offload within the current pass or re-plan it.

        The plan's future usage must already be released by the caller.
        """
        sat = plan.offload[0]
        g = self.oan.gs_index[plan.gs_id]
        until = self.tick_of(gs_unavailable_until)
        due_k = self._due_tick(plan.due)
        vis = self.oan.vis[sat, g]
        end = t
        while end + 1 < len(vis) and vis[end + 1]:
            end += 1
        limit = min(end, t + self.cfg.defer_window, due_k)
        if until <= limit:
            D = self._offload_slot(sat, g, until, limit, plan.volume)
            if D is not None:
                new = DeliveryPlan(plan.task_id, plan.mode, plan.gs_id, (), None,
                                   [(sat, t, D)], None, (sat, D), self.minutes(D), plan.created_at,
                                   plan.volume, plan.origin, plan.due, plan.orbit_offset,
                                   fragment=plan.fragment)
                if self._fits(new, t)[1] is None:
                    self._commit(new, t)
                    return new
        if task is None:
            from .tasking import Task
            task = Task(plan.task_id, plan.origin, plan.volume, plan.due - plan.created_at,
                        plan.created_at)
        new = self.plan_from(task, sat, t, plan.due, plan.volume)
        new.fragment = plan.fragment
        return new

    def adapt_urgency(self, task, holder, t, new_deadline):
        """Re-plan held data under a tightened deadline (minutes after creation)."""
        due = task.created_at + new_deadline
        if self.minutes(t) > due:
            raise SchedulingFailure("timeout")
        return self.plan_from(task, holder, t, due)
