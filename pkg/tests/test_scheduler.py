import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scheduler, window_graph
from orbittransit import oracle
from orbittransit.energy import EnergyParams
from orbittransit.scheduler import (Assignment, Mode, SchedulingFailure, Usage, offset_order,
                                    plan_usage)
from orbittransit.tasking import ScenarioConfig, Task, generate_stream

D = 6000.0  # Mb, one task


def task(origin=0, deadline=60.0, created=0.0, tid=0, volume=D):
    return Task(tid, origin, volume, deadline, created)


def test_offset_order():
    assert list(offset_order(2)) == [0, 1, -1, 2, -2]


def test_diffuse_picks_pco_nearest_station_on_own_orbit():
    oan = window_graph([(0, 0, 10, 12), (0, 1, 4, 6), (3, 0, 1, 3)], caps=(1000.0, 1000.0))
    sched = make_scheduler(oan)
    a, plans, left = sched.diffuse_traffic([task()])
    assert left == []
    assert a[0].orbit_offset == 0 and a[0].gs_id == 1
    assert plans[0].mode == Mode.PCO_ONLY and plans[0].offload == (0, 4)


def test_full_own_orbit_station_goes_hybrid_via_next_orbit():
    # a 50 Mbps station takes 3000 Mb per tick, less than one task
    oan = window_graph([(0, 0, 5, 7), (3, 1, 8, 10)], caps=(50.0, 1000.0))
    sched = make_scheduler(oan)
    a, plans, left = sched.diffuse_traffic([task()])
    p = plans[0]
    assert a[0].orbit_offset == 1
    assert p.mode == Mode.HYBRID and p.isl_path == (0, 3) and p.gs_id == 1
    assert p.offload == (3, 8)


def test_unreachable_task_left_unassigned():
    oan = window_graph([(4, 0, 50, 52)])
    sched = make_scheduler(oan)
    a, plans, left = sched.diffuse_traffic([task(deadline=20.0)])
    assert a == {} and plans == {}
    assert [pr.task.id for pr in left] == [0]


def test_plan_delivery_modes():
    oan = window_graph([(0, 0, 45, 47), (4, 0, 0, 60), (3, 0, 30, 32)])
    sched = make_scheduler(oan)
    p = sched.plan_delivery(task(deadline=60.0), Assignment(0, 0, 0, 0.0))
    assert p.mode == Mode.PCO_ONLY and p.completion == 45.0
    p = sched.plan_delivery(task(deadline=60.0), Assignment(0, 0, 1, 0.0))
    assert p.mode == Mode.HYBRID and p.isl_path == (0, 3) and p.offload == (3, 30)
    # deadline before the PCO: only an immediate ISL delivery is in time
    p = sched.plan_delivery(task(deadline=20.0), Assignment(0, 0, 0, 0.0))
    assert p.mode == Mode.ISL_ONLY and p.isl_path[-1] == 4 and p.isl_start == 0.0
    assert p.completion <= 20.0


def test_plan_delivery_failure_reason():
    oan = window_graph([(4, 0, 50, 52)])
    sched = make_scheduler(oan)
    with pytest.raises(SchedulingFailure):
        sched.plan_delivery(task(deadline=20.0), Assignment(0, 0, 0, 0.0))


def test_single_task_crosses_at_creation():
    oan = window_graph([(3, 0, 8, 10)])
    sched = make_scheduler(oan)
    [p] = sched.schedule_epoch([task(deadline=30.0)])
    assert p.mode == Mode.HYBRID and p.isl_start == 0.0


def test_contention_instance_waits_for_recorder():
    plans, _ = oracle.schedule_instance(oracle.contention_instance())
    assert plans[0].isl_start == 10.0


def test_single_task_instance_unique_plan():
    inst = oracle.single_task_instance()
    plans, _ = oracle.schedule_instance(inst)
    assert plans[0].mode == Mode.PCO_ONLY and plans[0].offload == (4, 0)
    assert oracle.compare(inst, plans).absolute == 0.0


def test_failed_origin_reports_outage():
    oan = window_graph([(0, 0, 5, 7)])
    sched = make_scheduler(oan)
    sched.failed[0] = True
    [p] = sched.schedule_epoch([task()])
    assert p.status == "failed" and p.reason == "satellite_outage"


def test_energy_floor_forces_later_own_orbit_slot():
    # low battery: offloading at minute 2 would cross the floor
    p = EnergyParams(kappa=0.2)
    oan = window_graph([(0, 0, 2, 8)])
    sched = make_scheduler(oan, energy=p, levels=np.full(9, 0.4 * p.battery_max))
    [plan] = sched.schedule_epoch([task(volume=4000.0)])
    # 2000 + 120 (D + 1) - 2 x 800 - 0.1 D >= 1000 first holds at D = 5
    assert plan.mode == Mode.PCO_ONLY and plan.offload == (0, 5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_own_orbit_first(seed):
    """A carried plan off the own orbit implies no own-orbit plan would fit."""
    inst = oracle.random_instance(seed)
    inst = dataclasses.replace(inst, tasks=inst.tasks[:1])
    plans, _ = oracle.schedule_instance(inst)
    p = plans[0]
    if p.status == "failed" or p.mode == Mode.PCO_ONLY:
        return
    oan = inst.graph()
    for c in oracle.candidate_plans(inst, oan, inst.task_objects()[0]):
        if c.mode != Mode.PCO_ONLY:
            continue
        book = oracle._Book(inst, oan)
        u = oracle.usage_of(c, oan)
        if not book.fits(u):
            continue
        book.apply(u)
        sats = {s for s, _ in u.tx} | {s for s, _, _ in u.store}
        assert not book.floor_ok(sats), (seed, c.offload)


def _epoch_run(toy_oan, seed):
    cfg = ScenarioConfig(intensity_level=3, tasks_per_tick=3, volume_scale=2.5e-5, seed=seed)
    tasks = generate_stream(cfg, toy_oan, 20)
    sched = make_scheduler(toy_oan)
    out = []
    by_tick = {}
    for t in tasks:
        by_tick.setdefault(t.created_at, []).append(t)
    for k in sorted(by_tick):
        out.extend(sched.schedule_epoch(by_tick[k]))
    return sched, out


def test_epoch_respects_capacities(toy_oan):
    sched, plans = _epoch_run(toy_oan, 1)
    lg = sched.ledger
    assert (lg.gs_commit <= lg.gs_cap[:, None] + 1e-6).all()
    assert (lg.tx_commit <= lg.tx_cap[:, None] + 1e-6).all()
    assert (lg.store_commit <= lg.store_cap[:, None] + 1e-6).all()
    ok = [p for p in plans if p.status != "failed"]
    assert ok
    for p in ok:
        assert p.completion <= p.due + 1e-9
        assert not oracle.check_plan(p, toy_oan)


def test_epoch_deterministic(toy_oan):
    _, a = _epoch_run(toy_oan, 2)
    _, b = _epoch_run(toy_oan, 2)
    assert [p.to_record() for p in a] == [p.to_record() for p in b]


def test_release_restores_ledger():
    oan = window_graph([(0, 0, 10, 12)])
    sched = make_scheduler(oan)
    [p] = sched.schedule_epoch([task()])
    sched.release(p, 0)
    lg = sched.ledger
    assert not lg.gs_commit.any() and not lg.tx_commit.any() and not lg.store_commit.any()


# -- re-planning --------------------------------------------------------------

def _carrying(windows, storage=8.0e6, caps=(1000.0,)):
    oan = window_graph(windows, caps=caps)
    sched = make_scheduler(oan, storage=storage)
    [p] = sched.schedule_epoch([task(deadline=40.0)])
    assert p.mode == Mode.PCO_ONLY and p.offload[0] == 0
    return sched, p


def _fail(sched, p, sat, t):
    sched.release(p, t)
    sched.failed[sat] = True


def test_handoff_to_neighbour():
    sched, p = _carrying([(0, 0, 20, 22), (1, 0, 10, 12)])
    _fail(sched, p, 0, 5)
    [c] = sched.replan_on_failure(p, 0, 5)
    assert c.isl_path == (0, 1) and c.offload == (1, 10) and c.gs_id == 0


def test_fragments_when_no_single_relay_fits():
    sched, p = _carrying([(0, 0, 20, 22), (1, 0, 10, 12), (2, 0, 14, 16)], storage=D)
    # every other satellite is half full, so no single relay holds the task
    for s in range(1, 9):
        sched.ledger.apply(Usage(D / 2, (), ((s, 0, 40),), None))
    _fail(sched, p, 0, 5)
    out = sched.replan_on_failure(p, 0, 5)
    assert len(out) == 2
    assert sorted(c.fragment for c in out) == [0, 1]
    assert sum(c.volume for c in out) == pytest.approx(D)


def test_escalates_to_isl_when_relay_misses_station():
    sched, p = _carrying([(0, 0, 20, 22), (4, 0, 5, 6)])
    _fail(sched, p, 0, 5)
    [c] = sched.replan_on_failure(p, 0, 5)
    assert c.mode == Mode.ISL_ONLY and c.fallback and c.isl_path[-1] == 4


def test_defer_within_pass():
    sched, p = _carrying([(0, 0, 10, 20)])
    sched.release(p, 10)
    new = sched.defer_offload(p, 13.0, 10)
    assert new.offload == (0, 13) and new.carry_intervals == [(0, 10, 13)]


def test_defer_beyond_pass_replans():
    sched, p = _carrying([(0, 0, 10, 20), (0, 1, 30, 32)], caps=(1000.0, 1000.0))
    sched.release(p, 10)
    sched.gs_down[0] = 22
    new = sched.defer_offload(p, 22.0, 10)
    assert new.gs_id == 1 and new.offload == (0, 30)


def test_adapt_urgency_switches_to_isl():
    oan = window_graph([(0, 0, 40, 42), (4, 0, 0, 60)])
    sched = make_scheduler(oan)
    t = task(deadline=60.0)
    new = sched.adapt_urgency(t, 0, 5, 15.0)
    assert new.mode == Mode.ISL_ONLY and new.completion <= 15.0
    with pytest.raises(SchedulingFailure):
        sched.adapt_urgency(t, 0, 20, 15.0)


def test_plan_usage_from_tick():
    oan = window_graph([(3, 0, 8, 10)])
    sched = make_scheduler(oan)
    [p] = sched.schedule_epoch([task(deadline=30.0)])
    u = plan_usage(p, oan, from_tick=4)
    assert all(k >= 4 for _, k in u.tx)
    assert all(a >= 4 for _, a, _ in u.store)
