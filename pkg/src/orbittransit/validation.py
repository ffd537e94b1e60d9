"""Checks backing the acceptance criteria, one function per criterion.

Each check returns a CheckResult whose `passed` flag is computed at the
criterion's stated tolerance and whose `details` carry the measured values.
Full-scale runs are memoised per process so that checks sharing runs (the
soundness, headline and delay checks) simulate each configuration once.
"""

import filecmp
import json
import math
import os
import tempfile
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .baselines import StrategyId
from .energy import BatteryState, EnergyParams, compute_dod, step_energy
from .engine import ConstraintViolation, DelayProfile
from .oan import build_oan, orbit_hops
from .constellation import PRESETS, generate_walker
from .scenario import bundled_scenario, run_scenario
from .topology import Grid

STRATEGIES = ("orbittransit", "nearest+isl_shortest", "nearest_available+isl_shortest",
              "nearest+pco_withhold", "nearest_available+pco_withhold")
BASELINES = STRATEGIES[1:]


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return "%s %s (%.1fs) %s" % ("PASS" if self.passed else "FAIL", self.name, self.seconds,
                                     json.dumps(self.details, sort_keys=True, default=str))


def _timed(name, fn, *args, **kw):
    t0 = time.perf_counter()
    passed, details = fn(*args, **kw)
    return CheckResult(name, bool(passed), details, time.perf_counter() - t0)


# -- full-scale run cache ------------------------------------------------------

_RUNS = {}


def reference_run(strategy="orbittransit", intensity=3, seed=0, delay=None, scenario="reference"):
    """Summary of one run of a bundled scenario, memoised per process."""
    delay = delay or DelayProfile()
    key = (scenario, strategy, intensity, seed, delay)
    if key not in _RUNS:
        sc = bundled_scenario(scenario)
        rec = run_scenario(sc, StrategyId.parse(strategy), intensity=intensity, seed=seed,
                           delay=delay)
        _RUNS[key] = {"summary": rec.summary, "ids": [r["id"] for r in rec.tasks],
                      "status": [r["status"] for r in rec.tasks]}
    return _RUNS[key]


def clear_cache():
    _RUNS.clear()


# -- criterion 1: piecewise-linear exp --------------------------------------------

def _piecewise(count=1000, samples=1000, seed=0):
    rae, mse = oracle.approximation_error(count, samples, seed)
    return rae <= 1e-5 and mse <= 1e-12, {"rae": rae, "mse": mse}


def check_piecewise_exp(count=1000, samples=1000, seed=0):
    return _timed("piecewise-exp", _piecewise, count, samples, seed)


# -- criterion 2: OAN path optimality -------------------------------------------

def torus_edges(n, m):
    """+Grid edges listed directly from the torus definition."""
    edges = set()
    for p in range(n):
        for i in range(m):
            a = p * m + i
            for b in (p * m + (i + 1) % m, ((p + 1) % n) * m + i):
                edges.add((min(a, b), max(a, b)))
    return edges


def _bfs_all(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    dist = np.full((n, n), -1, dtype=int)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    q.append(v)
    return dist


def oan_decomposition(grid: Grid, a, b):
    """Orbit-level hops plus the in-plane ring distance on the target orbit."""
    pa, ia = divmod(a, grid.sats_per_orbit)
    pb, ib = divmod(b, grid.sats_per_orbit)
    return orbit_hops(grid.num_orbits, pa, pb) + grid.ring(ia, ib, grid.sats_per_orbit)


def _oan_optimality(max_grid=8):
    if max_grid > 8:
        raise ValueError("max_grid is capped at 8")
    bad = []
    pairs = 0
    for n in range(3, max_grid + 1):
        for m in range(3, max_grid + 1):
            grid = Grid(n, m)
            dist = _bfs_all(grid.size, torus_edges(n, m))
            for a in range(grid.size):
                for b in range(a + 1, grid.size):
                    pairs += 1
                    if oan_decomposition(grid, a, b) != dist[a, b]:
                        bad.append((n, m, a, b))
    return not bad, {"pairs": pairs, "counterexamples": bad[:10]}


def check_oan_optimality(max_grid=8):
    return _timed("oan-optimality", _oan_optimality, max_grid)


# -- criterion 3: routing-table compression ---------------------------------------

def _compression(preset="starlink-s1"):
    cfg = PRESETS[preset]
    sats = generate_walker(cfg)
    oan = build_oan(sats, [], 1)
    orbit_level = oan.route_entries()
    sat_level = oan.satellite_route_entries()
    factor = sat_level / orbit_level
    ok = (orbit_level == cfg.num_orbits ** 2 and sat_level == cfg.total ** 2
          and factor == cfg.sats_per_orbit ** 2)
    return ok, {"orbit_entries": orbit_level, "satellite_entries": sat_level, "factor": factor}


def check_route_compression(preset="starlink-s1"):
    return _timed("route-compression", _compression, preset)


# -- criterion 4: the contention instance -------------------------------------------

def _contention():
    inst = oracle.contention_instance()
    plans, _ = oracle.schedule_instance(inst)
    hybrid = [p for p in plans if p.status != "failed"]
    t_isl = hybrid[0].isl_start if hybrid else None
    opt = oracle.exhaustive_schedule(inst)
    gap = oracle.compare(inst, plans, opt)
    opt_tisl = [p.isl_start for p in opt.plans]
    ok = t_isl == 10 and opt.feasible and gap.absolute == 0
    return ok, {"t_isl": t_isl, "optimum_t_isl": opt_tisl, "gap": gap.absolute,
                "optimum": opt.objective.total if opt.feasible else None}


def check_contention():
    return _timed("contention-instance", _contention)


# -- criterion 5: scheduler versus oracle -----------------------------------------------

def scheduler_gaps(instances=100, seed=0):
    pairs = oracle.feasible_instances(instances, seed)
    gaps = []
    for inst, opt in pairs:
        plans, _ = oracle.schedule_instance(inst)
        gaps.append(oracle.compare(inst, plans, opt).relative)
    return np.array(gaps, dtype=float)


def _scheduler_vs_oracle(instances=100, seed=0):
    gaps = scheduler_gaps(instances, seed)
    finite = gaps[np.isfinite(gaps)]
    within = float(np.mean(gaps <= 0.10)) if len(gaps) else 0.0
    mean = float(np.mean(gaps)) if len(gaps) else math.inf
    details = {"instances": int(len(gaps)), "within_10pct": within, "mean_gap": mean,
               "median_gap": float(np.median(gaps)) if len(gaps) else None,
               "infeasible_plan_sets": int(np.sum(~np.isfinite(gaps))),
               "mean_finite_gap": float(np.mean(finite)) if len(finite) else None,
               "zero_gap": float(np.mean(gaps == 0)) if len(gaps) else 0.0}
    return len(gaps) == instances and within >= 0.9 and mean <= 0.05, details


def check_scheduler_vs_oracle(instances=100, seed=0):
    return _timed("scheduler-vs-oracle", _scheduler_vs_oracle, instances, seed)


# -- criterion 6: constraint soundness ---------------------------------------------------

def _soundness(intensities=(1, 2, 3, 4, 5), seed=0):
    rows = {}
    ok = True
    for lvl in intensities:
        try:
            run = reference_run("orbittransit", lvl, seed)
        except ConstraintViolation as exc:
            rows[lvl] = "violation: %s" % exc
            ok = False
            continue
        sm = run["summary"]
        once = len(run["ids"]) == len(set(run["ids"])) == sm["total_tasks"]
        resolved = all(s in ("delivered", "failed") for s in run["status"])
        balanced = sm["delivered"] + sum(sm["failures"].values()) == sm["total_tasks"]
        rows[lvl] = {"tasks": sm["total_tasks"], "once": once, "resolved": resolved,
                     "balanced": balanced}
        ok &= once and resolved and balanced
    return ok, rows


def check_constraint_soundness(intensities=(1, 2, 3, 4, 5), seed=0):
    return _timed("constraint-soundness", _soundness, intensities, seed)


# -- criterion 7: headline comparison -------------------------------------------------------

def _headline(intensities=(1, 2, 3, 4, 5), seeds=(0, 1, 2)):
    life = {s: 0.0 for s in STRATEGIES}
    per_level = {}
    ok_b = ok_c = ok_d = True
    ot_queue = 0.0
    for lvl in intensities:
        failed = {s: 0 for s in STRATEGIES}
        queue = {s: 0.0 for s in STRATEGIES}
        success = {s: [] for s in STRATEGIES}
        lv_life = {s: 0.0 for s in STRATEGIES}
        for seed in seeds:
            for s in STRATEGIES:
                sm = reference_run(s, lvl, seed)["summary"]
                failed[s] += sm["failed"]
                queue[s] = max(queue[s], sm["max_queue_delay_ms"])
                success[s].append(sm["success_ratio"])
                lv_life[s] += sm["life_consumption"]
                if lvl >= 3 and s.startswith("nearest+") and sm["max_queue_delay_ms"] <= 1e4:
                    ok_c = False
        for s in STRATEGIES:
            life[s] += lv_life[s]
        ot_queue = max(ot_queue, queue["orbittransit"])
        ok_b &= all(failed["orbittransit"] < failed[b] for b in BASELINES)
        if lvl == 5:
            ok_d = all(max(success[s]) < 0.6 for s in STRATEGIES if s.endswith("pco_withhold"))
        per_level[lvl] = {"failed": failed, "max_queue_ms": queue,
                          "success": {s: float(np.mean(v)) for s, v in success.items()},
                          "life": lv_life}
    ok_c &= ot_queue <= 100.0
    base = life["nearest_available+isl_shortest"]
    reduction = 1.0 - life["orbittransit"] / base if base else 0.0
    ok_a = reduction >= 0.30
    details = {"a_life_reduction": reduction, "a": ok_a, "b": ok_b, "c": ok_c, "d": ok_d,
               "total_life": life, "per_intensity": per_level}
    return ok_a and ok_b and ok_c and ok_d, details


def check_headline(intensities=(1, 2, 3, 4, 5), seeds=(0, 1, 2)):
    return _timed("headline-comparison", _headline, intensities, seeds)


# -- criterion 8: telemetry delay ------------------------------------------------------------

def _delay(intensities=(1, 2, 3, 4, 5), seed=0, profile=DelayProfile(20, 0.3)):
    rows = {}
    ok = True
    for lvl in intensities:
        base = reference_run("orbittransit", lvl, seed)["summary"]
        late = reference_run("orbittransit", lvl, seed, profile)["summary"]
        hop_increase = (late["mean_path_hops"] / base["mean_path_hops"] - 1.0
                        if base["mean_path_hops"] else 0.0)
        d_success = late["success_ratio"] - base["success_ratio"]
        good = late["fallback_ratio"] <= 0.15 and hop_increase <= 0.05 and abs(d_success) <= 0.01
        ok &= good
        rows[lvl] = {"fallback_ratio": late["fallback_ratio"], "hop_increase": hop_increase,
                     "success_change": d_success, "ok": good}
    return ok, rows


def check_delay_robustness(intensities=(1, 2, 3, 4, 5), seed=0):
    return _timed("telemetry-delay", _delay, intensities, seed)


# -- criterion 9: determinism -------------------------------------------------------------------

def _determinism(scenario="reference", strategy="orbittransit", intensity=3, seed=0):
    sc = bundled_scenario(scenario)
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [os.path.join(tmp, "a"), os.path.join(tmp, "b")]
        for d in dirs:
            run_scenario(sc, StrategyId.parse(strategy), intensity=intensity, seed=seed, out_dir=d)
        same = {f: filecmp.cmp(os.path.join(dirs[0], f), os.path.join(dirs[1], f), shallow=False)
                for f in ("metrics.csv", "summary.json", "tasks.csv", "plans.json")}
    return same["metrics.csv"] and same["summary.json"], same


def check_determinism(scenario="reference", strategy="orbittransit", intensity=3, seed=0):
    return _timed("determinism", _determinism, scenario, strategy, intensity, seed)


# -- criterion 10: energy properties ---------------------------------------------------------------

def energy_walk(steps=10_000, seed=0, params=None):
    """Random step_energy sequence; returns a list of violation strings."""
    p = params or EnergyParams()
    rng = np.random.default_rng(seed)
    st = BatteryState(p.battery_max * rng.uniform(0.0, 1.0), 0.0, 0.0, 0.0)
    st = BatteryState(st.level, compute_dod(st.level, p.battery_max),
                      compute_dod(st.level, p.battery_max), 0.0)
    bad = []
    for i in range(steps):
        sunlit = bool(rng.random() < 0.6)
        # mostly small draws, with the odd one that hits the zero clamp
        tx = float(rng.choice([0.0, rng.uniform(0, 5000), rng.uniform(0, 80000)], p=[0.4, 0.5, 0.1]))
        io = float(rng.uniform(0, 1e6)) if rng.random() < 0.5 else 0.0
        nxt = step_energy(st, p, sunlit, tx, io)
        raw = st.level + (p.solar_power if sunlit else 0.0) - p.kappa * tx - p.zeta * io
        if not 0.0 <= nxt.level <= p.battery_max:
            bad.append("step %d: level %r out of bounds" % (i, nxt.level))
        if 0.0 < raw < p.battery_max and not math.isclose(nxt.level, raw, abs_tol=1e-9):
            bad.append("step %d: additivity broken" % i)
        inc = nxt.life_consumed - st.life_consumed
        if nxt.level >= st.level and inc != 0.0:
            bad.append("step %d: life charged while not discharging" % i)
        if nxt.level < st.level and not inc >= 1.0:
            bad.append("step %d: discharge below unit life" % i)
        st = nxt
    return bad


def _energy(runs=10, steps=1000):
    bad = []
    for r in range(runs):
        bad += energy_walk(steps, seed=r)
    return not bad, {"steps": runs * steps, "violations": bad[:10]}


def check_energy_invariants(seeded_runs=10, steps=1000):
    return _timed("energy-properties", _energy, seeded_runs, steps)


# -- report ------------------------------------------------------------------------------------------

QUICK = (check_piecewise_exp, check_oan_optimality, check_route_compression, check_contention,
         check_energy_invariants)
FULL = QUICK + (check_scheduler_vs_oracle, check_constraint_soundness, check_headline,
                check_delay_robustness, check_determinism)


def report(full=False):
    """Run the checks; returns (text, json-able dict)."""
    results = [fn() for fn in (FULL if full else QUICK)]
    text = "\n".join(r.line() for r in results) + "\n"
    data = {r.name: {"passed": r.passed, "seconds": r.seconds, "details": r.details}
            for r in results}
    return text, data
