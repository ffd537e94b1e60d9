"""Discrete-time execution of delivery strategies.

Each tick the engine generates tasks, lets the strategy plan them against
(possibly delayed) state, executes the pickups, crossings and offloads due
in that tick, steps every battery, drains station queues and records a
metrics row.  OrbitTransit plans are executed as committed; the baselines
act on physical state with no look-ahead and stall when blocked.
"""

import csv
import io
import json
import math
import os
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .baselines import StrategyId
from .energy import BatteryBank, EnergyParams
from .scheduler import (FAILURE_REASONS, DeliveryPlan, Ledger, Mode, RealView, Scheduler,
                        SchedulerConfig, SchedulingFailure, plan_usage)
from .tasking import Task, Urgency


class ConstraintViolation(AssertionError):
    pass


@dataclass(frozen=True)
class DelayProfile:
    delay_minutes: int = 0
    probability: float = 0.0

    def __post_init__(self):
        if self.delay_minutes < 0:
            raise ValueError("delay must be non-negative")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("delay probability must lie in [0, 1]")

    @property
    def active(self):
        return self.delay_minutes > 0 and self.probability > 0


@dataclass(frozen=True)
class FaultEntry:
    satellite: int
    start: int
    end: int


@dataclass(frozen=True)
class SurgeEntry:
    gs_id: int
    start: int
    end: int


@dataclass(frozen=True)
class UrgencyEvent:
    task_id: int
    tick: int
    new_deadline: float


@dataclass
class SimClock:
    tick: int = 0
    horizon: int = 360
    dt: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def advance(self):
        self.tick += 1


class GsQueue:
    """FIFO of offloaded volume waiting for station service."""

    def __init__(self, service_rate):
        self.service_rate = float(service_rate)  # Mb/s
        self.items = deque()  # [shipment id, remaining Mb, due tick]
        self.backlog = 0.0
        self.drops = 0

    def push(self, sid, volume, due):
        self.items.append([sid, float(volume), due])
        self.backlog += volume

    def drain(self, seconds, tick):
        budget = self.service_rate * seconds
        done, dropped = [], []
        while self.items:
            sid, rem, due = self.items[0]
            if tick > due:
                self.items.popleft()
                self.backlog -= rem
                self.drops += 1
                dropped.append(sid)
                continue
            if budget <= 0:
                break
            take = min(rem, budget)
            budget -= take
            self.backlog -= take
            if take < rem:
                self.items[0][1] = rem - take
                break
            self.items.popleft()
            done.append(sid)
        if not self.items:
            self.backlog = 0.0
        return done, dropped


def queue_delay(queue: GsQueue):
    """Queueing delay in milliseconds."""
    return queue.backlog / queue.service_rate * 1000.0


class StateBuffer:
    """Ring of per-satellite battery samples for delayed telemetry."""

    def __init__(self, n, depth):
        self.depth = depth
        self.ring = np.zeros((depth + 1, n))
        self.latest = -1

    def push(self, tick, levels):
        self.ring[tick % (self.depth + 1)] = levels
        self.latest = tick

    def at(self, tick):
        tick = max(tick, 0, self.latest - self.depth)
        return self.ring[tick % (self.depth + 1)]


class DelayedView(RealView):
    """Ledger and battery state as seen through delayed telemetry.

    For an entity drawn stale this tick, battery levels come from delay ticks
    ago and resource commitments decided after that point (but before the
    current tick) are hidden.
    """

    def __init__(self, ledger, levels, buffer, delay):
        super().__init__(ledger, levels)
        self.buffer = buffer
        self.delay = delay
        self.tick = 0
        self.stale_sat = np.zeros(ledger.tx_commit.shape[0], dtype=bool)
        self.stale_gs = np.zeros(ledger.gs_commit.shape[0], dtype=bool)

    def refresh(self, tick, levels, stale_sat, stale_gs):
        self.tick = tick
        self._levels = levels
        self.stale_sat = stale_sat
        self.stale_gs = stale_gs
        self._mixed = np.where(stale_sat, self.buffer.at(tick - self.delay), levels)

    def level(self, sat):
        return float(self._mixed[sat])

    def levels(self):
        return self._mixed

    def _hidden(self, kind, idx, a, b):
        out = np.zeros(b - a)
        lo = self.tick - self.delay
        for decided, x, y, d in self.ledger.log.get((kind, idx), ()):
            if lo < decided < self.tick and x < b and y > a:
                out[max(x, a) - a:min(y, b) - a] += d
        return out

    def gs_row(self, g, a, b):
        row = self.ledger.gs_commit[g, a:b]
        return row - self._hidden("gs", g, a, b) if self.stale_gs[g] else row

    def tx_row(self, s, a, b):
        row = self.ledger.tx_commit[s, a:b]
        return row - self._hidden("tx", s, a, b) if self.stale_sat[s] else row

    def store_row(self, s, a, b):
        row = self.ledger.store_commit[s, a:b]
        return row - self._hidden("store", s, a, b) if self.stale_sat[s] else row

    def gs_col(self, k):
        col = self.ledger.gs_commit[:, k].copy()
        for g in np.nonzero(self.stale_gs)[0]:
            col[g] -= self._hidden("gs", g, k, k + 1)[0]
        return col

    def tx_col(self, k):
        col = self.ledger.tx_commit[:, k].copy()
        for (kind, s) in self.ledger.log:
            if kind == "tx" and self.stale_sat[s]:
                col[s] -= self._hidden("tx", s, k, k + 1)[0]
        return col


@dataclass
class MetricsRecord:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    tasks: list = field(default_factory=list)
    plans: list = field(default_factory=list)
    levels: np.ndarray = None  # (satellites, ticks + 1) when recorded

    def metrics_csv(self):
        return _csv(self.rows)

    def tasks_csv(self):
        return _csv(self.tasks)

    def summary_json(self):
        return json.dumps(self.summary, indent=1, sort_keys=True) + "\n"

    def plans_json(self):
        return json.dumps(self.plans, indent=1, sort_keys=True) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        for name, text in (("metrics.csv", self.metrics_csv()), ("tasks.csv", self.tasks_csv()),
                           ("summary.json", self.summary_json()),
                           ("plans.json", self.plans_json())):
            with open(os.path.join(out_dir, name), "w", newline="") as f:
                f.write(text)
        return out_dir


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 9))
    return "" if v is None else str(v)


def _csv(rows):
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def plan_events(plan: DeliveryPlan):
    """tick -> [transmitting satellites, holder after the tick, arrives]."""
    ev = {}

    def add(k, sats, holder, arrives=False):
        e = ev.setdefault(int(k), [set(), "keep", False])
        e[0].update(int(s) for s in sats)
        if holder != "keep":
            e[1] = holder
        e[2] = e[2] or arrives

    if plan.pickup is not None:
        add(plan.pickup[1], [plan.pickup[0]], plan.pickup[0])
    if plan.isl_path and plan.isl_start is not None:
        add(int(round(plan.isl_start)), plan.isl_path, plan.isl_path[-1])
    if plan.offload is not None:
        add(plan.offload[1], [plan.offload[0]], None, True)
    return dict(sorted(ev.items()))


class _Ship:
    __slots__ = ("sid", "task_id", "volume", "plan", "version", "holder", "gs", "events",
                 "state", "isl_hops", "carry", "fallback", "routing", "frag", "since")

    def __init__(self, sid, task_id, volume, frag=0):
        self.sid = sid
        self.task_id = task_id
        self.volume = volume
        self.plan = None
        self.version = 0
        self.holder = None
        self.gs = None
        self.events = {}
        self.state = "active"
        self.isl_hops = 0
        self.carry = 0
        self.fallback = False
        self.routing = None
        self.frag = frag
        self.since = 0


class Simulation:
    def __init__(self, oan, tasks, strategy: StrategyId, energy: EnergyParams = None,
                 storage_capacity=8.0e6, horizon=360, dt=1.0, delay: DelayProfile = None,
                 faults=(), surges=(), urgency=(), scheduler_config: SchedulerConfig = None,
                 initial_fraction=1.0, seed=0, check=True, record_levels=False):
        if abs(oan.step - dt) > 1e-9:
            raise ValueError("engine tick must equal the visibility sampling step")
        self.oan = oan
        self.stations = oan.stations
        self.strategy = strategy
        self.energy = energy or EnergyParams()
        self.clock = SimClock(0, horizon, dt)
        self.delay = delay or DelayProfile()
        self.seed = seed
        self.check = check
        n, g = oan.grid.size, len(self.stations)
        self.n = n
        self.bank = BatteryBank(n, self.energy, initial_fraction)
        self.store_cap = np.broadcast_to(np.asarray(storage_capacity, dtype=float), (n,)).copy()
        self.tx_cap = oan.link_capacity * 60.0 * dt
        self.gs_cap = np.array([s.capacity for s in self.stations]) * 60.0 * dt
        self.queues = [GsQueue(s.capacity) for s in self.stations]
        self.stored = np.zeros(n)
        self.failed = np.zeros(n, dtype=bool)
        self.gs_down = {}
        self.tasks = {t.id: t for t in tasks}
        self.by_tick = defaultdict(list)
        for t in tasks:
            self.by_tick[int(round(t.created_at / dt))].append(t)
        self.faults = sorted(faults, key=lambda f: (f.start, f.satellite))
        self.surges = sorted(surges, key=lambda s: (s.start, s.gs_id))
        self.urgency = defaultdict(list)
        for u in urgency:
            self.urgency[int(u.tick)].append(u)
        self.ships = {}
        self.agenda = defaultdict(list)
        self.outcome = {}  # task id -> dict
        self.task_ships = defaultdict(list)
        self.counters = defaultdict(int)
        self.records = MetricsRecord()
        # per-tick battery levels, kept only on request (n x ticks can be large)
        self.level_trace = [self.bank.level.copy()] if record_levels else None
        self.life_total = 0.0
        self.plans_out = []
        self.stale_rng = np.random.default_rng([seed, 1])
        cfg = scheduler_config or SchedulerConfig(energy=self.energy, dt=dt)
        if cfg.energy != self.energy:
            cfg = SchedulerConfig(**{**cfg.__dict__, "energy": self.energy})
        self.ledger = Ledger(oan, self.energy, self.store_cap, dt, cfg.cumulative_load)
        self.real_view = RealView(self.ledger, self.bank.level)
        self.buffer = None
        if self.delay.active:
            self.ledger.keep_log = True
            self.buffer = StateBuffer(n, self.delay.delay_minutes)
            self.view = DelayedView(self.ledger, self.bank.level, self.buffer,
                                    self.delay.delay_minutes)
        else:
            self.view = self.real_view
        self.sched = Scheduler(oan, self.ledger, cfg, self.view)
        self.sched.real_view = self.real_view
        self.sched.failed = self.failed
        self.sched.gs_down = self.gs_down
        # selection ledger for the baselines
        self.sel_load = np.zeros((g, oan.num_samples))
        self.arrivals = np.zeros(g)

    # -- bookkeeping ------------------------------------------------------

    @property
    def orbittransit(self):
        return self.strategy.routing == "orbittransit"

    def _new_ship(self, task_id, volume, frag=0):
        sid = len(self.ships)
        sh = _Ship(sid, task_id, volume, frag)
        self.ships[sid] = sh
        self.task_ships[task_id].append(sid)
        return sh

    def _fail_task(self, task_id, reason):
        out = self.outcome[task_id]
        if out["status"] == "pending":
            out["status"] = "failed"
            out["reason"] = reason
        for sid in self.task_ships[task_id]:
            sh = self.ships[sid]
            if sh.state == "active":
                self._drop(sh)

    def _drop(self, sh):
        if sh.holder is not None:
            self.stored[sh.holder] -= sh.volume
            sh.holder = None
        if self.orbittransit and sh.plan is not None:
            self.sched.release(sh.plan, self.clock.tick)
        sh.state = "failed"
        sh.version += 1

    def _set_plan(self, sh, plan, k, now=False):
        sh.plan = plan
        sh.version += 1
        sh.events = {t: e for t, e in plan_events(plan).items() if t >= k}
        sh.gs = self.oan.gs_index[plan.gs_id] if plan.gs_id is not None else None
        sh.fallback = sh.fallback or plan.fallback
        for t in sh.events:
            if now and t == k:
                # the caller runs this tick's event through _pending_now
                continue
            self.agenda[t].append((sh.sid, sh.version))
        self.plans_out.append(plan.to_record())

    # -- OrbitTransit -----------------------------------------------------

    def _schedule_orbittransit(self, tasks, k):
        plans = self.sched.schedule_epoch(tasks)
        for task, plan in zip(sorted(tasks, key=lambda x: x.id), plans):
            if plan.status == "failed":
                self._fail_task(task.id, plan.reason)
                self.plans_out.append(plan.to_record())
                continue
            sh = self._new_ship(task.id, task.volume)
            sh.routing = "orbittransit"
            self._set_plan(sh, plan, k)
            self.outcome[task.id]["mode"] = plan.mode.value
            if plan.fallback:
                self.outcome[task.id]["fallback"] = True

    def _exec_orbittransit(self, sh, k, tx_marks):
        e = sh.events.get(k)
        if e is None:
            return
        sats, holder_after, arrives = e
        if arrives and self.gs_down.get(sh.gs, -1) > k:
            self._defer(sh, k)
            return
        if self.check:
            for s in sats:
                if self.failed[s] and s != sh.holder:
                    raise ConstraintViolation("tick %d: plan %d uses failed satellite %d"
                                              % (k, sh.task_id, s))
        for s in sats:
            tx_marks[s] += sh.volume
        if sh.plan.isl_start is not None and int(round(sh.plan.isl_start)) == k:
            sh.isl_hops += sh.plan.isl_hops
        self._move(sh, holder_after)
        if arrives:
            self._arrive(sh, k)

    def _move(self, sh, holder_after):
        if holder_after == "keep":
            return
        k = self.clock.tick
        if sh.holder is not None:
            self.stored[sh.holder] -= sh.volume
            sh.carry += k - sh.since
        sh.since = k
        sh.holder = holder_after
        if holder_after is not None:
            self.stored[holder_after] += sh.volume

    def _arrive(self, sh, k):
        self.queues[sh.gs].push(sh.sid, sh.volume, self._due_tick(sh.task_id))
        self.arrivals[sh.gs] += sh.volume
        sh.state = "queued"

    def _due_tick(self, task_id):
        return int(math.floor(self.tasks[task_id].due / self.clock.dt + 1e-9))

    def _defer(self, sh, k):
        self.counters["deferrals"] += 1
        self.sched.release(sh.plan, k)
        until = self.gs_down[sh.gs] * self.clock.dt
        try:
            new = self.sched.defer_offload(sh.plan, until, k, self.tasks[sh.task_id])
        except SchedulingFailure as exc:
            sh.plan = None
            self._fail_task(sh.task_id, exc.reason)
            return
        self._replace(sh, new, k)

    def _replace(self, sh, plan, k):
        if plan.fallback:
            self.outcome[sh.task_id]["fallback"] = True
        self._set_plan(sh, plan, k, now=True)
        if k in sh.events:
            self._pending_now.append((sh.sid, sh.version))

    def _fault_start(self, f, k):
        self.failed[f.satellite] = True
        sat = f.satellite
        for sid in sorted(self.ships):
            sh = self.ships[sid]
            if sh.state != "active":
                continue
            if not self.orbittransit:
                if sh.holder == sat:
                    self._fail_task(sh.task_id, "satellite_outage")
                continue
            future = set()
            for t, (sats, holder, _) in sh.events.items():
                future.update(sats)
                if holder not in (None, "keep"):
                    future.add(holder)
            if sh.holder != sat and sat not in future:
                continue
            task = self.tasks[sh.task_id]
            self.sched.release(sh.plan, k)
            try:
                if sh.holder == sat:
                    plans = self.sched.replan_on_failure(sh.plan, sat, k, sh.volume)
                else:
                    plans = [self.sched.plan_from(task, sh.holder, k, task.due, sh.volume)]
            except SchedulingFailure as exc:
                sh.plan = None
                self._fail_task(sh.task_id, exc.reason)
                continue
            if sh.holder == sat:
                self.counters["handoffs"] += 1
            if len(plans) > 1:
                self.counters["fragmented_tasks"] += 1
                frac = sh.volume / len(plans)
                holder = sh.holder
                self.stored[holder] -= sh.volume
                sh.holder = None
                ships = [sh] + [self._new_ship(sh.task_id, frac, j) for j in range(1, len(plans))]
                for j, (s2, p) in enumerate(zip(ships, plans)):
                    s2.volume = frac
                    s2.frag = j
                    s2.routing = "orbittransit"
                    s2.holder = holder
                    self.stored[holder] += frac
                    s2.isl_hops = sh.isl_hops
                    s2.carry = sh.carry
                    s2.since = sh.since
                    self._replace(s2, p, k)
            else:
                self._replace(sh, plans[0], k)

    def _urgency(self, u, k):
        task = self.tasks.get(u.task_id)
        if task is None:
            return
        new_task = Task(task.id, task.origin_satellite, task.volume, float(u.new_deadline),
                        task.created_at, Urgency.URGENT)
        if task.id not in self.outcome:
            self.tasks[task.id] = new_task
            self._replace_pending(task, new_task)
            return
        self.tasks[task.id] = new_task
        self.counters["urgency_changes"] += 1
        if not self.orbittransit:
            return
        for sid in self.task_ships[task.id]:
            sh = self.ships[sid]
            if sh.state != "active" or sh.plan is None:
                continue
            self.sched.release(sh.plan, k)
            try:
                plan = self.sched.adapt_urgency(new_task, sh.holder, k, u.new_deadline)
            except SchedulingFailure as exc:
                sh.plan = None
                self._fail_task(task.id, exc.reason)
                return
            self._replace(sh, plan, k)

    def _replace_pending(self, old, new):
        lst = self.by_tick[int(round(old.created_at / self.clock.dt))]
        for j, t in enumerate(lst):
            if t.id == old.id:
                lst[j] = new

    # -- baselines --------------------------------------------------------

    def _energy_ok(self, sat, k, spent):
        p = self.energy
        gain = p.solar_power * self.clock.dt if self.oan.sunlit[sat, k] else 0.0
        level = min(self.bank.level[sat] + gain, p.battery_max)
        return level - spent >= p.floor - 1e-9

    def _can_send(self, sat, k, vol, tx_marks):
        if self.failed[sat]:
            return False
        if tx_marks[sat] + vol > self.tx_cap[sat] + 1e-6:
            return False
        spent = self.energy.kappa * (tx_marks[sat] + vol)
        return self._energy_ok(sat, k, spent)

    def _admits(self, g, k, vol):
        if self.gs_down.get(g, -1) > k:
            return False
        if self.strategy.selection == "nearest":
            return True
        return self.arrivals[g] + vol <= self.gs_cap[g] + 1e-6

    def _schedule_baseline(self, tasks, k):
        oan = self.oan
        for task in sorted(tasks, key=lambda x: x.id):
            if self.failed[task.origin_satellite]:
                self._fail_task(task.id, "satellite_outage")
                continue
            due = min(self._due_tick(task.id), oan.num_samples - 1)
            try:
                if self.strategy.selection == "nearest":
                    gs_id = baselines.select_nearest(task, oan, task.created_at)
                else:
                    if self.strategy.routing == "isl_shortest":
                        def bucket(g, k=k, due=due):
                            col = oan.vis[:, g, k]
                            return k if col.any() else None
                    else:
                        def bucket(g, k=k, due=due, o=task.origin_satellite):
                            return baselines.next_window(oan, o, g, k, due)
                    gs_id = baselines.select_nearest_available(
                        task, oan, task.created_at, self.sel_load, self.gs_cap, bucket)
            except SchedulingFailure as exc:
                self._fail_task(task.id, exc.reason)
                continue
            g = oan.gs_index[gs_id]
            if self.strategy.selection == "nearest_available":
                kk = bucket(g)
                self.sel_load[g, kk] += task.volume
            sh = self._new_ship(task.id, task.volume)
            sh.routing = self.strategy.routing
            sh.gs = g
            sh.holder = None
            sh.version += 1
            self.outcome[task.id]["mode"] = ("isl_only" if sh.routing == "isl_shortest"
                                             else "pco_only")
            self.plans_out.append({"task_id": task.id, "gs": gs_id, "routing": sh.routing,
                                   "decided_at": k})
            self.agenda[k].append((sh.sid, sh.version))

    def _exec_baseline(self, sh, k, tx_marks):
        vol = sh.volume
        due = self._due_tick(sh.task_id)
        if k > due:
            self._fail_task(sh.task_id, "timeout")
            return
        task = self.tasks[sh.task_id]
        if sh.holder is None:
            # pickup at creation
            o = task.origin_satellite
            if not self._can_send(o, k, vol, tx_marks):
                self._fail_task(sh.task_id, "energy_depleted")
                return
            tx_marks[o] += vol
            self._move(sh, o)
            picked = True
        else:
            picked = False
        if sh.routing == "pco_withhold":
            self._attempt_pco(sh, k, tx_marks, picked)
        else:
            self._attempt_isl(sh, k, tx_marks, picked)

    def _next_attempt(self, sh, k):
        self.agenda[k + 1].append((sh.sid, sh.version))

    def _attempt_pco(self, sh, k, tx_marks, picked):
        sat, g, vol = sh.holder, sh.gs, sh.volume
        due = self._due_tick(sh.task_id)
        if self.oan.vis[sat, g, k]:
            ok = self._admits(g, k, vol)
            if ok and (picked or self._can_send(sat, k, vol, tx_marks)):
                if not picked:
                    tx_marks[sat] += vol
                self._move(sh, None)
                self._arrive(sh, k)
                return
            if k + 1 <= due:
                self._next_attempt(sh, k)
            else:
                self._fail_task(sh.task_id, "gs_congestion" if not ok else "timeout")
                return
            if self.stored[sat] > self.store_cap[sat] + 1e-6:
                self._fail_task(sh.task_id, "storage_overflow")
            return
        if self.stored[sat] > self.store_cap[sat] + 1e-6:
            self._fail_task(sh.task_id, "storage_overflow")
            return
        nxt = baselines.next_window(self.oan, sat, g, k + 1, min(due, self.oan.num_samples - 1))
        if nxt is None:
            self.agenda[min(due + 1, self.oan.num_samples - 1)].append((sh.sid, sh.version))
            if due + 1 > self.oan.num_samples - 1:
                self._fail_task(sh.task_id, "timeout")
            return
        self.agenda[nxt].append((sh.sid, sh.version))

    def _attempt_isl(self, sh, k, tx_marks, picked):
        g, vol = sh.gs, sh.volume
        due = self._due_tick(sh.task_id)
        task = self.tasks[sh.task_id]
        plan = baselines.route_isl_shortest(task, self.stations[g].id, self.oan,
                                            k * self.clock.dt, holder=sh.holder,
                                            allowed=~self.failed)
        blocked = None
        if plan is not None:
            path = plan.isl_path
            sent = False
            for j, s in enumerate(path):
                if j == 0:
                    if not picked:
                        if not self._can_send(s, k, vol, tx_marks):
                            blocked = "energy_depleted"
                            break
                        tx_marks[s] += vol
                    sent = True
                    continue
                if not self._can_send(s, k, vol, tx_marks):
                    blocked = "energy_depleted"
                    break
                tx_marks[s] += vol
                sh.isl_hops += 1
                self._move(sh, s)
            if blocked is None:
                if self._admits(g, k, vol):
                    self._move(sh, None)
                    self._arrive(sh, k)
                    return
                blocked = "gs_congestion"
        if self.stored[sh.holder] > self.store_cap[sh.holder] + 1e-6:
            self._fail_task(sh.task_id, "storage_overflow")
            return
        if k + 1 > due:
            self._fail_task(sh.task_id, blocked or "timeout")
            return
        self._next_attempt(sh, k)

    # -- main loop --------------------------------------------------------

    def _draw_stale(self, k):
        if not self.delay.active:
            return
        p = self.delay.probability
        stale_sat = self.stale_rng.random(self.n) < p
        stale_gs = self.stale_rng.random(len(self.stations)) < p
        self.view.refresh(k, self.bank.level, stale_sat, stale_gs)
        self.ledger.prune_log(k - self.delay.delay_minutes)

    def run(self):
        oan, dt = self.oan, self.clock.dt
        k_max = oan.num_samples - 1
        horizon_ticks = int(round(self.clock.horizon / dt))
        faults_on = defaultdict(list)
        faults_off = defaultdict(list)
        for f in self.faults:
            faults_on[f.start].append(f)
            faults_off[f.end].append(f)
        surges_on = defaultdict(list)
        surges_off = defaultdict(list)
        for s in self.surges:
            surges_on[s.start].append(s)
            surges_off[s.end].append(s)
        k = 0
        while True:
            self.clock.tick = k
            self.real_view.set_levels(self.bank.level)
            if self.buffer is not None:
                self.buffer.push(k, self.bank.level)
            self._draw_stale(k)
            self.arrivals[:] = 0.0
            tx_marks = np.zeros(self.n)
            self._pending_now = []
            for f in faults_off.get(k, ()):
                self.failed[f.satellite] = False
            for s in surges_off.get(k, ()):
                g = oan.gs_index[s.gs_id]
                if self.gs_down.get(g, -1) <= k:
                    self.gs_down.pop(g, None)
            for s in surges_on.get(k, ()):
                g = oan.gs_index[s.gs_id]
                self.gs_down[g] = max(self.gs_down.get(g, -1), s.end)
            for f in faults_on.get(k, ()):
                self._fault_start(f, k)
            for u in self.urgency.get(k, ()):
                self._urgency(u, k)
            new = self.by_tick.get(k, []) if k < horizon_ticks else []
            for t in new:
                self.outcome[t.id] = {"status": "pending", "reason": None, "mode": None,
                                      "fallback": False, "completion": None}
            if new:
                if self.orbittransit:
                    self._schedule_orbittransit(new, k)
                else:
                    self._schedule_baseline(new, k)
            work = deque(self.agenda.pop(k, []))
            while work or self._pending_now:
                if not work:
                    work.extend(self._pending_now)
                    self._pending_now = []
                sid, ver = work.popleft()
                sh = self.ships[sid]
                if sh.version != ver or sh.state != "active":
                    continue
                if self.orbittransit:
                    self._exec_orbittransit(sh, k, tx_marks)
                else:
                    self._exec_baseline(sh, k, tx_marks)
            self._step(k, tx_marks, len(new))
            if k >= horizon_ticks and not any(s.state in ("active", "queued")
                                              for s in self.ships.values()):
                break
            if k >= k_max:
                for sh in self.ships.values():
                    if sh.state in ("active", "queued"):
                        self._fail_task(sh.task_id, "timeout")
                break
            k += 1
        return self._finish(k)

    def _step(self, k, tx_marks, n_new):
        dt = self.clock.dt
        if self.check:
            self._assert_capacity(k, tx_marks)
        before = self.bank.level
        inc = self.bank.step(self.oan.sunlit[:, k], tx_marks, self.stored, dt)
        if self.check and self.orbittransit:
            spent = (tx_marks > 0) | (self.stored > 0)
            low = spent & (self.bank.level < self.energy.floor - 1e-6) & (self.bank.level < before)
            if low.any():
                s = int(np.nonzero(low)[0][0])
                raise ConstraintViolation("tick %d: satellite %d below the battery floor (%.3f)"
                                          % (k, s, self.bank.level[s]))
        life = float(inc.sum())
        self.life_total += life
        if self.level_trace is not None:
            self.level_trace.append(self.bank.level.copy())
        load = self.arrivals / self.gs_cap
        for g, q in enumerate(self.queues):
            if not q.items:
                continue
            done, dropped = q.drain(dt * 60.0, k)
            for sid in done:
                self._delivered(self.ships[sid], k)
            for sid in dropped:
                sh = self.ships[sid]
                sh.state = "failed"
                self._fail_task(sh.task_id, "gs_congestion")
        qd = max((queue_delay(q) for q in self.queues), default=0.0)
        active = sum(1 for o in self.outcome.values() if o["status"] == "pending")
        delivered = sum(1 for o in self.outcome.values() if o["status"] == "delivered")
        failed = sum(1 for o in self.outcome.values() if o["status"] == "failed")
        ratio = self.stored / self.store_cap
        lvl = self.bank.level / self.energy.battery_max
        self.records.rows.append({
            "tick": k, "new_tasks": n_new, "active": active, "delivered": delivered,
            "failed": failed, "gs_load_max": float(load.max()) if len(load) else 0.0,
            "gs_load_mean": float(load.mean()) if len(load) else 0.0,
            "queue_delay_max_ms": float(qd), "storage_max": float(ratio.max()),
            "storage_mean": float(ratio.mean()), "battery_min": float(lvl.min()),
            "battery_mean": float(lvl.mean()), "life_tick": life, "life_total": self.life_total,
        })

    def _assert_capacity(self, k, tx_marks):
        over = self.stored > self.store_cap + 1e-6
        if over.any():
            s = int(np.nonzero(over)[0][0])
            raise ConstraintViolation("tick %d: satellite %d stores %.1f Mb over capacity"
                                      % (k, s, self.stored[s]))
        if (self.stored < -1e-6).any():
            raise ConstraintViolation("tick %d: negative storage" % k)
        if not self.orbittransit:
            return
        tx_over = tx_marks > self.tx_cap + 1e-6
        if tx_over.any():
            s = int(np.nonzero(tx_over)[0][0])
            raise ConstraintViolation("tick %d: satellite %d transmits over link capacity" % (k, s))
        gs_over = self.arrivals > self.gs_cap + 1e-6
        if gs_over.any():
            g = int(np.nonzero(gs_over)[0][0])
            raise ConstraintViolation("tick %d: station %d receives over capacity" % (k, g))

    def _delivered(self, sh, k):
        sh.state = "done"
        out = self.outcome[sh.task_id]
        if out["status"] != "pending":
            return
        if all(self.ships[s].state == "done" for s in self.task_ships[sh.task_id]):
            task = self.tasks[sh.task_id]
            done = k * self.clock.dt
            if self.orbittransit and self.check and done > task.due + 1e-6:
                raise ConstraintViolation("task %d delivered at %s after its deadline %s"
                                          % (task.id, done, task.due))
            if done > task.due + 1e-6:
                out["status"] = "failed"
                out["reason"] = "timeout"
                return
            out["status"] = "delivered"
            out["completion"] = done

    def _path_hops(self, task_id):
        """ISL hops plus carried minutes expressed as in-plane hops."""
        per_min = self.oan.grid.sats_per_orbit / (self.oan.period_min or 95.5)
        vals = [self.ships[sid].isl_hops + self.ships[sid].carry * self.clock.dt * per_min
                for sid in self.task_ships[task_id]]
        return float(np.mean(vals)) if vals else 0.0

    def _finish(self, last_tick):
        if self.check:
            for tid, o in self.outcome.items():
                if o["status"] == "pending":
                    raise ConstraintViolation("task %d left unresolved" % tid)
        counts = {r: 0 for r in FAILURE_REASONS}
        rows = []
        hops, delays = [], []
        delivered_volume = 0.0
        modes = defaultdict(int)
        fallbacks = 0
        for tid in sorted(self.outcome):
            o = self.outcome[tid]
            t = self.tasks[tid]
            h = self._path_hops(tid)
            if o["status"] == "failed":
                counts[o["reason"]] = counts.get(o["reason"], 0) + 1
            else:
                hops.append(h)
                delays.append(o["completion"] - t.created_at)
                delivered_volume += t.volume
            if o["mode"]:
                modes[o["mode"]] += 1
            fallbacks += bool(o["fallback"])
            rows.append({
                "id": tid, "created": t.created_at, "origin": t.origin_satellite,
                "volume_mb": t.volume, "deadline_min": t.deadline, "urgency": t.urgency.value,
                "status": o["status"], "reason": o["reason"] or "", "mode": o["mode"] or "",
                "completion": o["completion"], "path_hops": h, "fallback": int(bool(o["fallback"])),
                "fragments": len(self.task_ships[tid]),
            })
        total = len(self.outcome)
        delivered = total - sum(counts.values())
        loads = [r["gs_load_max"] for r in self.records.rows]
        self.records.tasks = rows
        self.records.plans = self.plans_out
        if self.level_trace is not None:
            self.records.levels = np.stack(self.level_trace, axis=1)
        self.records.summary = {
            "strategy": self.strategy.label, "seed": self.seed, "total_tasks": total,
            "delivered": delivered, "failed": total - delivered,
            "success_ratio": delivered / total if total else 1.0,
            "failures": counts, "mean_path_hops": float(np.mean(hops)) if hops else 0.0,
            "mean_delivery_min": float(np.mean(delays)) if delays else 0.0,
            "fallback_count": fallbacks, "fallback_ratio": fallbacks / total if total else 0.0,
            "handoffs": self.counters["handoffs"], "deferrals": self.counters["deferrals"],
            "fragmented_tasks": self.counters["fragmented_tasks"],
            "urgency_changes": self.counters["urgency_changes"],
            "life_consumption": self.life_total,
            "max_queue_delay_ms": max((r["queue_delay_max_ms"] for r in self.records.rows),
                                      default=0.0),
            "max_gs_load_ratio": max(loads, default=0.0),
            "mean_gs_load_ratio": float(np.mean([r["gs_load_mean"] for r in self.records.rows]))
            if self.records.rows else 0.0,
            "delivered_volume_mb": delivered_volume,
            "gs_drops": sum(q.drops for q in self.queues),
            "min_battery_fraction": min((r["battery_min"] for r in self.records.rows),
                                        default=1.0),
            "mode_counts": dict(sorted(modes.items())), "ticks": last_tick + 1,
            "flow_solves": self.sched.stats["flow_solves"] if self.orbittransit else 0,
        }
        return self.records

