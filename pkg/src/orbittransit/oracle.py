"""Exact reference for tiny instances.

The scheduling problem couples binary station choices with binary
transmit/carry indicators and an exponential life term.  The pieces needed
to state it as a mixed-integer program live here (the product
linearization and the piecewise-linear exponential), but the optimum itself
is found by enumerating every admissible plan per task with a
branch-and-bound over the combined assignment.  That is exact at the sizes
allowed by `check_bounds` and needs no solver.

Life consumption has a useful closed form when no battery hits zero: a
satellite discharges in a tick exactly when its spend exceeds its solar
gain, and the life term for that tick is exp((spend - gain) / B_max).  The
search relies on that (every added plan can only add cost); the public
`evaluate_objective` recomputes life from full level traces instead, so the
two bookkeepings check each other.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .energy import EnergyParams
from .oan import OanGraph, isl_transfer_minutes
from .scheduler import (DeliveryPlan, Ledger, Mode, RealView, Scheduler, SchedulerConfig, Usage,
                        offset_order)
from .tasking import Task
from .topology import GroundStation

MAX_TASKS = 5
MAX_STATIONS = 8
MAX_SLOTS = 6
MAX_OFFSETS = 3


class OversizeInstance(ValueError):
    pass


# -- linearization pieces ---------------------------------------------------

@dataclass(frozen=True)
class LinearizedProduct:
    x: int
    z: int
    alpha: int

    def constraints(self):
        return (self.alpha <= self.x, self.alpha <= self.z, self.alpha >= self.x + self.z - 1)

    def feasible(self):
        return all(self.constraints())


def linearize_product(x, z):
    """The unique binary alpha with alpha <= x, alpha <= z, alpha >= x + z - 1."""
    if x not in (0, 1) or z not in (0, 1):
        raise ValueError("linearize_product takes binary arguments")
    sols = [a for a in (0, 1) if LinearizedProduct(x, z, a).feasible()]
    assert len(sols) == 1
    return sols[0]


class Breakpoints:
    """m uniform nodes on [0, 1] with exp precomputed at each."""

    def __init__(self, count=1000):
        if count < 2:
            raise ValueError("need at least two breakpoints")
        self.count = count
        self.nodes = np.linspace(0.0, 1.0, count)
        self.values = np.exp(self.nodes)

    def weights(self, x):
        """(i, lambda_i, lambda_i+1): the adjacent pair reproducing x."""
        if not 0.0 <= x <= 1.0:
            raise ValueError("x = %r outside [0, 1]" % x)
        i = min(int(x * (self.count - 1)), self.count - 2)
        a0, a1 = self.nodes[i], self.nodes[i + 1]
        lam1 = (x - a0) / (a1 - a0)
        return i, 1.0 - lam1, lam1


def piecewise_exp(x, breakpoints=None):
    """Interpolated exp(x) for x in [0, 1]; scalars or arrays."""
    bp = breakpoints or Breakpoints()
    arr = np.asarray(x, dtype=float)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("piecewise_exp is defined on [0, 1]")
    i = np.minimum((arr * (bp.count - 1)).astype(int), bp.count - 2)
    a0 = bp.nodes[i]
    lam1 = (arr - a0) / (bp.nodes[i + 1] - a0)
    out = (1.0 - lam1) * bp.values[i] + lam1 * bp.values[i + 1]
    # exact at the nodes themselves
    out = np.where(arr == bp.nodes[i], bp.values[i], out)
    out = np.where(arr == bp.nodes[i + 1], bp.values[i + 1], out)
    return float(out) if np.ndim(x) == 0 else out


def approximation_error(count=1000, samples=1000, seed=0):
    """(mean relative error, mean squared error) over uniform samples."""
    xs = np.random.default_rng(seed).uniform(0.0, 1.0, samples)
    approx = piecewise_exp(xs, Breakpoints(count))
    exact = np.exp(xs)
    return float(np.mean(np.abs(approx - exact) / exact)), float(np.mean((approx - exact) ** 2))


# -- objective ------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveValue:
    life_term: float
    delay_term: float

    @property
    def total(self):
        return self.life_term + self.delay_term


def life_from_trace(levels, battery_max):
    """Life consumption summed over one satellite's level trace (initial level first)."""
    dod = (battery_max - np.asarray(levels, dtype=float)) / battery_max
    diff = np.diff(dod)
    return float(np.exp(diff[diff > 0]).sum())


def delivery_minutes(plan: DeliveryPlan, dt=1.0):
    """Creation time plus carried time: the offload tick in minutes."""
    if plan.offload is None:
        return math.inf
    return plan.offload[1] * dt


def evaluate_objective(plans, energy_traces, battery_max=EnergyParams.battery_max, dt=1.0):
    """Life term from per-satellite level traces plus summed delivery times.

    energy_traces is an (n, K+1) array of battery levels, initial level in
    column 0.  Failed or unplanned entries in plans are skipped.
    """
    traces = np.asarray(energy_traces, dtype=float)
    life = sum(life_from_trace(row, battery_max) for row in traces) if traces.size else 0.0
    delay = sum(delivery_minutes(p, dt) for p in plans if p is not None and p.status != "failed")
    return ObjectiveValue(float(life), float(delay))


# -- tiny instances -------------------------------------------------------

@dataclass
class TinyInstance:
    """Hand-sized scheduling problem, one epoch of tasks on a toy grid.

    windows: [sat, gs_id, start, end) visibility; dark: [sat, start, end)
    eclipse; background: committed usages {volume, tx: [[s, k]], store:
    [[s, a, b]], gs: [gs_id, k] or null}.  All times are one-minute ticks.
    """
    orbits: int
    per_orbit: int
    horizon: int
    stations: list  # [{"id", "capacity"}] with capacity in Mbps
    windows: list
    tasks: list  # [{"id", "origin", "volume", "deadline", "created_at"}]
    dark: list = field(default_factory=list)
    link_capacity: float = 1000.0
    storage: float = 8.0e6
    energy: dict = field(default_factory=dict)
    initial_levels: object = 1.0  # fraction, scalar or per satellite
    background: list = field(default_factory=list)
    isl_slots: list = None
    max_offset: int = 1

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    @property
    def size(self):
        return self.orbits * self.per_orbit

    def energy_params(self):
        return EnergyParams(**self.energy)

    def levels(self):
        p = self.energy_params()
        return np.broadcast_to(np.asarray(self.initial_levels, dtype=float),
                               (self.size,)) * p.battery_max

    def graph(self):
        stations = [GroundStation(int(s["id"]), 0.0, 0.0, float(s["capacity"]))
                    for s in self.stations]
        return OanGraph.from_windows(self.orbits, self.per_orbit, stations, self.horizon,
                                     [tuple(w) for w in self.windows],
                                     dark=[tuple(d) for d in self.dark],
                                     link_capacity=self.link_capacity)

    def task_objects(self):
        return [Task(int(t["id"]), int(t["origin"]), float(t["volume"]), float(t["deadline"]),
                     float(t.get("created_at", 0.0))) for t in self.tasks]

    def background_usages(self, oan):
        out = []
        for b in self.background:
            gs = b.get("gs")
            out.append(Usage(float(b["volume"]), tuple(tuple(x) for x in b.get("tx", ())),
                             tuple(tuple(x) for x in b.get("store", ())),
                             None if gs is None else (oan.gs_index[gs[0]], int(gs[1]))))
        return out


def check_bounds(inst: TinyInstance):
    if len(inst.tasks) > MAX_TASKS:
        raise OversizeInstance("%d tasks (at most %d)" % (len(inst.tasks), MAX_TASKS))
    if len(inst.stations) > MAX_STATIONS:
        raise OversizeInstance("%d stations (at most %d)" % (len(inst.stations), MAX_STATIONS))
    if inst.isl_slots is None or len(inst.isl_slots) > MAX_SLOTS:
        raise OversizeInstance("need an explicit list of at most %d crossing slots" % MAX_SLOTS)
    if 2 * inst.max_offset + 1 > MAX_OFFSETS:
        raise OversizeInstance("at most %d orbit offsets" % MAX_OFFSETS)
    created = {float(t.get("created_at", 0.0)) for t in inst.tasks}
    if len(created) > 1:
        raise OversizeInstance("all tasks of an instance share one creation tick")


# -- independent bookkeeping ----------------------------------------------

class _Book:
    """Per-instance resource arrays and the local life formula."""

    def __init__(self, inst: TinyInstance, oan):
        self.inst = inst
        self.oan = oan
        self.p = inst.energy_params()
        n, k = inst.size, oan.num_samples
        self.k = k
        self.tx = np.zeros((n, k))
        self.store = np.zeros((n, k))
        self.gs = np.zeros((len(oan.stations), k))
        self.gain = np.where(oan.sunlit, self.p.solar_power, 0.0)
        self.level0 = inst.levels().astype(float)
        self.tx_cap = inst.link_capacity * 60.0
        self.store_cap = inst.storage
        self.gs_cap = np.array([s.capacity for s in oan.stations]) * 60.0

    def spend(self, s, k):
        return self.p.kappa * self.tx[s, k] + self.p.zeta * self.store[s, k]

    def cell_life(self, s, k, spend=None):
        x = (self.spend(s, k) if spend is None else spend) - self.gain[s, k]
        return math.exp(x / self.p.battery_max) if x > 1e-12 else 0.0

    def apply(self, use, sign=1):
        d = sign * use.volume
        for s, k in use.tx:
            self.tx[s, k] += d
        for s, a, b in use.store:
            self.store[s, a:b] += d
        if use.gs is not None:
            self.gs[use.gs[0], use.gs[1]] += d

    def cells(self, use):
        out = set(use.tx)
        for s, a, b in use.store:
            out.update((s, k) for k in range(a, b))
        return out

    def fits(self, use):
        d = use.volume
        for s, k in use.tx:
            if self.tx[s, k] + d > self.tx_cap + 1e-6:
                return False
        for s, a, b in use.store:
            if b > a and self.store[s, a:b].max() + d > self.store_cap + 1e-6:
                return False
        if use.gs is not None and self.gs[use.gs] + d > self.gs_cap[use.gs[0]] + 1e-6:
            return False
        return True

    def marginal_life(self, use):
        """Life added by use on top of the current arrays."""
        d = use.volume
        add = {}
        for s, k in use.tx:
            add[(s, k)] = add.get((s, k), 0.0) + self.p.kappa * d
        for s, a, b in use.store:
            for k in range(a, b):
                add[(s, k)] = add.get((s, k), 0.0) + self.p.zeta * d
        return sum(self.cell_life(s, k, self.spend(s, k) + e) - self.cell_life(s, k)
                   for (s, k), e in add.items())

    def trace(self, s):
        p = self.p
        lv = [self.level0[s]]
        for k in range(self.k):
            lv.append(min(max(lv[-1] + self.gain[s, k] - self.spend(s, k), 0.0), p.battery_max))
        return np.array(lv)

    def floor_ok(self, sats):
        for s in sats:
            tr = self.trace(s)
            drop = np.diff(tr) < 0
            if (tr[1:][drop] < self.p.floor - 1e-9).any():
                return False
        return True

    def life_total(self):
        return sum(self.cell_life(s, k) for s in range(self.tx.shape[0]) for k in range(self.k)
                   if self.spend(s, k) > 0)


def usage_of(plan: DeliveryPlan, oan):
    """Usage of a plan, derived without the scheduler's helper."""
    tx = set()
    for e in (plan.pickup, plan.offload):
        if e is not None:
            tx.add((int(e[0]), int(e[1])))
    if plan.isl_path and plan.isl_start is not None:
        tx.update((int(s), int(round(plan.isl_start))) for s in plan.isl_path)
    store = tuple((int(s), int(a), int(b)) for s, a, b in plan.carry_intervals if b > a)
    gs = None
    if plan.offload is not None and plan.gs_id is not None:
        gs = (oan.gs_index[plan.gs_id], int(plan.offload[1]))
    return Usage(plan.volume, tuple(sorted(tx)), store, gs)


def check_plan(plan: DeliveryPlan, oan):
    """Structural validity: path adjacency, offload visibility, deadline."""
    grid = oan.grid
    path = plan.isl_path
    for a, b in zip(path, path[1:]):
        if b not in grid.neighbors(a):
            return "path %s is not a chain of neighbours" % (path,)
    if plan.offload is None:
        return "no offload"
    s, k = plan.offload
    if not oan.vis[s, oan.gs_index[plan.gs_id], k]:
        return "satellite %d does not see station %s at tick %d" % (s, plan.gs_id, k)
    if plan.completion > plan.due + 1e-9:
        return "completion %.3f after due %.3f" % (plan.completion, plan.due)
    return None


def evaluate_plans(inst: TinyInstance, plans):
    """(objective, violations) of a full plan set on an instance.

    Every task must be planned; capacity, storage, floor and deadline are
    checked from scratch and the life term comes from level traces.
    """
    oan = inst.graph()
    book = _Book(inst, oan)
    for u in inst.background_usages(oan):
        book.apply(u)
    bad = []
    ids = {int(t["id"]) for t in inst.tasks}
    got = {p.task_id for p in plans if p is not None and p.status != "failed"}
    if got != ids:
        bad.append("tasks not planned: %s" % sorted(ids - got))
    for p in plans:
        if p is None or p.status == "failed":
            continue
        why = check_plan(p, oan)
        if why:
            bad.append("task %d: %s" % (p.task_id, why))
        u = usage_of(p, oan)
        if not book.fits(u):
            bad.append("task %d exceeds a capacity" % p.task_id)
        book.apply(u)
    if not book.floor_ok(range(inst.size)):
        bad.append("battery floor violated")
    traces = np.array([book.trace(s) for s in range(inst.size)])
    base = _Book(inst, oan)
    for u in inst.background_usages(oan):
        base.apply(u)
    base_traces = np.array([base.trace(s) for s in range(inst.size)])
    obj = evaluate_objective([p for p in plans if p is not None], traces,
                             book.p.battery_max)
    # background life is common to every plan set and left out
    bg = evaluate_objective([], base_traces, book.p.battery_max)
    return ObjectiveValue(obj.life_term - bg.life_term, obj.delay_term), bad


# -- enumeration ------------------------------------------------------------

def _chain(oan, src, delta):
    step = 1 if delta > 0 else -1
    return tuple(oan.counterpart(src, step * j) for j in range(abs(delta) + 1))


def candidate_plans(inst: TinyInstance, oan, task: Task, isl_only="always"):
    """Every admissible plan for one task.

    isl_only: "always" admits ISL-only plans alongside the carried ones
    (the scheduler may fall back to them for any reason), "fallback" only
    when no carried plan meets the deadline, "never" drops them.
    """
    t = int(round(task.created_at))
    due = min(int(math.floor(task.due + 1e-9)), oan.num_samples - 1)
    out = []
    seen = set()
    for delta in offset_order(min(inst.max_offset, oan.num_orbits // 2)):
        path = _chain(oan, task.origin_satellite, delta)
        if path[-1] in seen:
            continue
        seen.add(path[-1])
        tail = path[-1]
        for g, st in enumerate(oan.stations):
            ds = [k for k in range(t, due + 1) if oan.vis[tail, g, k]]
            if delta == 0:
                for D in ds:
                    carry = [(tail, t, D)] if D > t else []
                    out.append(DeliveryPlan(task.id, Mode.PCO_ONLY, st.id, (), None, carry,
                                            (tail, t), (tail, D), float(D), task.created_at,
                                            task.volume, task.origin_satellite, task.due, 0))
                continue
            for s in sorted(inst.isl_slots):
                if not t <= s <= due:
                    continue
                for D in ds:
                    if D < s:
                        continue
                    carry = []
                    if s > t:
                        carry.append((path[0], t, s))
                    if D > s:
                        carry.append((tail, s, D))
                    out.append(DeliveryPlan(task.id, Mode.HYBRID, st.id, path, float(s), carry,
                                            (path[0], t), (tail, D), float(D), task.created_at,
                                            task.volume, task.origin_satellite, task.due, delta))
    if isl_only == "always" or (isl_only == "fallback" and not out):
        grid = oan.grid
        for g, st in enumerate(oan.stations):
            for v in np.nonzero(oan.vis[:, g, t])[0]:
                path = grid.bfs_path(task.origin_satellite, [int(v)])
                if path is None:
                    continue
                done = t + isl_transfer_minutes(task.volume, len(path) - 1,
                                                float(oan.link_capacity[path[0]]))
                if done > task.due + 1e-9:
                    continue
                out.append(DeliveryPlan(task.id, Mode.ISL_ONLY, st.id, tuple(path), float(t), [],
                                        (path[0], t), (path[-1], t), done, task.created_at,
                                        task.volume, task.origin_satellite, task.due, 0))
    return out


@dataclass
class OracleResult:
    feasible: bool
    objective: ObjectiveValue = None
    plans: list = None
    explored: int = 0


def exhaustive_schedule(inst: TinyInstance, isl_only="always", node_limit=2_000_000,
                        incumbent=None):
    """Optimal plan set by branch-and-bound over per-task candidates.

    incumbent, if given, is a known plan set used only as the starting
    bound; it is re-validated here and ignored when it breaks a constraint.
    """
    check_bounds(inst)
    oan = inst.graph()
    book = _Book(inst, oan)
    for u in inst.background_usages(oan):
        book.apply(u)
    tasks = sorted(inst.task_objects(), key=lambda x: x.id)
    cands = []
    for task in tasks:
        cs = []
        for p in candidate_plans(inst, oan, task, isl_only):
            u = usage_of(p, oan)
            cs.append((p, u, delivery_minutes(p), book.cells(u)))
        if not cs:
            return OracleResult(False)
        # by delay first so that a candidate failing the bound ends the scan
        cs.sort(key=lambda c: (c[2], book.marginal_life(c[1])))
        cands.append(cs)
    # most constrained tasks first
    cands.sort(key=len)
    # delay lower bound of the tasks still to place
    rest = [0.0] * (len(cands) + 1)
    for i in range(len(cands) - 1, -1, -1):
        rest[i] = rest[i + 1] + cands[i][0][2]
    best = [math.inf, None, 0.0, 0.0]
    if incumbent is not None:
        obj, bad = evaluate_plans(inst, incumbent)
        if not bad:
            best = [obj.total + 1e-6, list(incumbent), obj.life_term, obj.delay_term]
    chosen = []
    explored = 0

    def dfs(i, life, delay):
        nonlocal explored
        if i == len(cands):
            if life + delay < best[0] - 1e-9:
                best[:] = [life + delay, list(chosen), life, delay]
            return
        for p, u, dmin, cells in cands[i]:
            explored += 1
            if explored > node_limit:
                raise OversizeInstance("enumeration exceeded %d nodes" % node_limit)
            if delay + dmin + rest[i + 1] + life >= best[0] - 1e-9:
                break
            if not book.fits(u):
                continue
            dl = book.marginal_life(u)
            if life + dl + delay + dmin + rest[i + 1] >= best[0] - 1e-9:
                continue
            book.apply(u)
            if book.floor_ok({s for s, _ in cells}):
                chosen.append(p)
                dfs(i + 1, life + dl, delay + dmin)
                chosen.pop()
            book.apply(u, -1)

    dfs(0, 0.0, 0.0)
    if best[1] is None:
        return OracleResult(False, explored=explored)
    plans = sorted(best[1], key=lambda q: q.task_id)
    return OracleResult(True, ObjectiveValue(best[2], best[3]), plans, explored)


# -- scheduler on an instance -------------------------------------------------

def schedule_instance(inst: TinyInstance, use_flow=True):
    """Run one scheduling epoch of the OrbitTransit scheduler on inst."""
    oan = inst.graph()
    p = inst.energy_params()
    ledger = Ledger(oan, p, inst.storage)
    for u in inst.background_usages(oan):
        ledger.apply(u)
    cfg = SchedulerConfig(energy=p, max_offset=inst.max_offset, candidate_cap=inst.horizon + 1,
                          isl_slots=tuple(inst.isl_slots) if inst.isl_slots is not None else None,
                          use_flow=use_flow)
    sched = Scheduler(oan, ledger, cfg, RealView(ledger, inst.levels().copy()))
    return sched.schedule_epoch(inst.task_objects()), sched


@dataclass
class Gap:
    optimum: ObjectiveValue
    heuristic: ObjectiveValue
    feasible: bool = True

    @property
    def absolute(self):
        return self.heuristic.total - self.optimum.total

    @property
    def relative(self):
        if self.optimum.total <= 0:
            return 0.0 if self.absolute <= 1e-9 else math.inf
        return self.absolute / self.optimum.total


def compare(inst: TinyInstance, plans, optimum: OracleResult = None):
    """Gap of a supplied plan set against the enumerated optimum.

    A plan set that fails a task or breaks a constraint has infinite cost.
    """
    opt = optimum or exhaustive_schedule(inst)
    if not opt.feasible:
        return Gap(None, None, feasible=False)
    obj, bad = evaluate_plans(inst, plans)
    if bad:
        obj = ObjectiveValue(math.inf, math.inf)
    return Gap(opt.objective, obj)


def scheduler_gap(inst: TinyInstance):
    plans, _ = schedule_instance(inst)
    return compare(inst, plans)


# -- instance builders ------------------------------------------------------

def contention_instance():
    """Two orbits contend for one satellite's recorder.

    Task A already occupies satellite X (orbit 0) from minute 5 to 10 and
    X can hold one task.  Task B starts on orbit 1 at minute 0 and its only
    station is seen by X from minute 15, so B must cross to X; crossing
    before minute 10 would overlap A in X's recorder.
    """
    d = 4000.0
    x, y = 0, 3  # 3 x 3 grid: orbit 0 slot 0 and orbit 1 slot 0
    return TinyInstance(
        orbits=3, per_orbit=3, horizon=24,
        stations=[{"id": 0, "capacity": 1000.0}],
        windows=[[x, 0, 15, 19]],
        tasks=[{"id": 1, "origin": y, "volume": d, "deadline": 20.0, "created_at": 0.0}],
        storage=d,
        background=[{"volume": d, "tx": [], "store": [[x, 5, 10]], "gs": None}],
        isl_slots=[0, 5, 10, 14],
        max_offset=1,
    )


def single_task_instance():
    """One task with exactly one feasible plan: a bent-pipe offload."""
    return TinyInstance(
        orbits=3, per_orbit=3, horizon=10,
        stations=[{"id": 0, "capacity": 1000.0}],
        windows=[[4, 0, 0, 1]],
        tasks=[{"id": 0, "origin": 4, "volume": 2000.0, "deadline": 5.0, "created_at": 0.0}],
        isl_slots=[0], max_offset=1,
    )


def random_instance(seed, horizon=36):
    """Seeded tiny instance: 3 orbits of 4, 2 to 4 stations, up to 5 tasks.

    Each station is overflown by most planes at nearly the same time (on
    the full shell the earliest windows of a satellite and its neighbour-
    plane counterpart differ by at most 2 minutes in 90% of cases); members
    of a plane see it one after another.  Capacities are a small multiple
    of the task volume so that tasks contend.
    """
    rng = np.random.default_rng([seed, 7])
    orbits, per = 3, 4
    spacing = 6  # ticks between consecutive members over the same spot
    n_st = int(rng.integers(2, 5))
    d = float(rng.choice([2000.0, 3000.0, 4000.0]))
    stations = [{"id": j, "capacity": float(d / 60.0 * rng.choice([1.0, 1.0, 2.0]))}
                for j in range(n_st)]
    cycle = per * spacing
    windows = []
    for j in range(n_st):
        # neighbouring planes pass over a station at nearly the same time
        start = int(rng.integers(0, cycle))
        for p in range(orbits):
            start += int(rng.integers(-1, 2))
            if rng.random() < 0.3:
                continue
            width = int(rng.integers(2, 4))
            for i in range(per):
                a = (start - i * spacing) % cycle
                for b in range(a, horizon, cycle):
                    windows.append([p * per + i, j, b, min(b + width, horizon)])
    dark = []
    for p in range(orbits):
        if rng.random() < 0.5:
            a = int(rng.integers(0, horizon))
            for i in range(per):
                dark.append([p * per + i, a, min(a + 8, horizon)])
    n_tasks = int(rng.integers(2, MAX_TASKS + 1))
    tasks = [{"id": i, "origin": int(rng.integers(0, orbits * per)), "volume": d,
              "deadline": float(rng.integers(10, 30)), "created_at": 0.0}
             for i in range(n_tasks)]
    slots = sorted({0, *map(int, rng.choice(np.arange(1, 24), size=4, replace=False))})
    return TinyInstance(
        orbits=orbits, per_orbit=per, horizon=horizon, stations=stations, windows=windows,
        tasks=tasks, dark=dark, link_capacity=d / 60.0 * float(rng.choice([1.0, 2.0])),
        storage=d * float(rng.choice([1.0, 2.0, 3.0])),
        energy={"kappa": float(rng.choice([0.05, 0.1, 0.2]))},
        initial_levels=float(rng.choice([0.4, 0.7, 1.0])),
        isl_slots=slots[:MAX_SLOTS], max_offset=1,
    )


def feasible_instances(count, seed=0, max_tries=None, node_limit=300_000):
    """The first `count` seeded random instances with a feasible optimum.

    Instances the search cannot settle within node_limit are skipped.

    Returns [(instance, OracleResult)].
    """
    out = []
    k = 0
    limit = max_tries or count * 20
    while len(out) < count and k < limit:
        inst = random_instance(seed * 100003 + k)
        k += 1
        try:
            res = exhaustive_schedule(inst, node_limit=node_limit)
        except OversizeInstance:
            # the search could not settle it within the node budget
            continue
        if res.feasible:
            out.append((inst, res))
    return out


def plans_from_records(records, inst: TinyInstance):
    """DeliveryPlan objects from plans.json style records."""
    tasks = {t.id: t for t in inst.task_objects()}
    out = []
    for r in records:
        t = tasks[int(r["task_id"])]
        if r.get("status") == "failed":
            out.append(DeliveryPlan(t.id, Mode(r["mode"]), status="failed", volume=t.volume))
            continue
        ev = [tuple(e) for e in r["gsl_events"]]
        pickup = ev[0] if len(ev) > 1 else None
        offload = ev[-1] if ev else None
        out.append(DeliveryPlan(t.id, Mode(r["mode"]), r["gs"], tuple(r["path"]), r["t_isl"],
                                [tuple(c) for c in r["intervals"]], pickup, offload,
                                r["completion"] if r["completion"] is not None else math.inf,
                                t.created_at, t.volume, t.origin_satellite, t.due))
    return out


def retime_hybrid(plan: DeliveryPlan, s):
    """Copy of a hybrid plan whose crossing happens at tick s instead."""
    if plan.mode != Mode.HYBRID:
        raise ValueError("only hybrid plans have a crossing time")
    src, tail = plan.isl_path[0], plan.isl_path[-1]
    t0 = plan.pickup[1] if plan.pickup else int(plan.created_at)
    end = plan.offload[1]
    if not t0 <= s <= end:
        raise ValueError("crossing %s outside [%s, %s]" % (s, t0, end))
    carry = [c for c in ((src, t0, s), (tail, s, end)) if c[2] > c[1]]
    return replace(plan, isl_start=float(s), carry_intervals=carry)
