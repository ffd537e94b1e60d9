import dataclasses
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbittransit import oracle
from orbittransit.oracle import (Breakpoints, OversizeInstance, TinyInstance, linearize_product,
                                 piecewise_exp)
from orbittransit.scheduler import Mode


@pytest.mark.parametrize("x,z", list(itertools.product((0, 1), repeat=2)))
def test_linearized_product_is_and(x, z):
    assert linearize_product(x, z) == x * z


def test_linearized_product_rejects_non_binary():
    with pytest.raises(ValueError):
        linearize_product(2, 1)


def test_piecewise_exact_at_nodes():
    bp = Breakpoints(50)
    assert np.array_equal(piecewise_exp(bp.nodes, bp), np.exp(bp.nodes))


def test_piecewise_error_within_interpolation_bound():
    # linear interpolation of a convex function: 0 <= err <= max f'' h^2 / 8
    for m in (5, 50, 1000):
        bp = Breakpoints(m)
        h = 1.0 / (m - 1)
        xs = np.linspace(0.0, 1.0, 20001)
        err = piecewise_exp(xs, bp) - np.exp(xs)
        assert err.min() >= -1e-12
        assert err.max() <= math.e * h * h / 8 + 1e-12


def test_error_shrinks_with_more_breakpoints():
    errs = [oracle.approximation_error(m)[0] for m in (10, 100, 1000, 2000)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


@given(st.floats(0.0, 1.0))
def test_weights_reproduce_x(x):
    bp = Breakpoints(100)
    i, l0, l1 = bp.weights(x)
    assert l0 >= -1e-12 and l1 >= -1e-12 and l0 + l1 == pytest.approx(1.0)
    assert l0 * bp.nodes[i] + l1 * bp.nodes[i + 1] == pytest.approx(x, abs=1e-12)


def test_piecewise_domain():
    with pytest.raises(ValueError):
        piecewise_exp(1.5)
    with pytest.raises(ValueError):
        Breakpoints(1)


def test_life_from_trace():
    got = oracle.life_from_trace([5000.0, 4000.0, 4500.0, 3000.0], 5000.0)
    assert got == pytest.approx(math.exp(0.2) + math.exp(0.3))


def test_single_task_optimum():
    inst = oracle.single_task_instance()
    res = oracle.exhaustive_schedule(inst)
    assert res.feasible
    [p] = res.plans
    assert p.offload == (4, 0) and p.gs_id == 0 and p.carry_intervals == []
    carried = oracle.candidate_plans(inst, inst.graph(), inst.task_objects()[0], isl_only="never")
    assert len(carried) == 1


def test_contention_optimum_delays_crossing():
    inst = oracle.contention_instance()
    res = oracle.exhaustive_schedule(inst)
    assert [p.isl_start for p in res.plans] == [10.0]
    early = oracle.retime_hybrid(res.plans[0], 5)
    obj, bad = oracle.evaluate_plans(inst, [early])
    assert bad and "capacity" in bad[0]
    assert math.isinf(oracle.compare(inst, [early], res).absolute)


def test_retime_bounds():
    res = oracle.exhaustive_schedule(oracle.contention_instance())
    with pytest.raises(ValueError):
        oracle.retime_hybrid(res.plans[0], 30)


def test_oversize_rejected():
    inst = oracle.random_instance(3)
    many = [dict(t, id=i) for i, t in enumerate(inst.tasks * 3)][:oracle.MAX_TASKS + 1]
    with pytest.raises(OversizeInstance):
        oracle.exhaustive_schedule(dataclasses.replace(inst, tasks=many))
    with pytest.raises(OversizeInstance):
        oracle.exhaustive_schedule(dataclasses.replace(inst, isl_slots=None))
    with pytest.raises(OversizeInstance):
        oracle.exhaustive_schedule(dataclasses.replace(inst, max_offset=2))


def test_json_round_trip():
    inst = oracle.random_instance(11)
    again = TinyInstance.from_json(inst.to_json())
    assert again == inst


def test_missing_task_is_infeasible():
    inst = oracle.contention_instance()
    _, bad = oracle.evaluate_plans(inst, [])
    assert bad and "not planned" in bad[0]


def _brute_optimum(inst):
    """Optimum by plain product over candidates, scored by evaluate_plans."""
    oan = inst.graph()
    cands = [oracle.candidate_plans(inst, oan, t) for t in inst.task_objects()]
    best = math.inf
    for combo in itertools.product(*cands):
        obj, bad = oracle.evaluate_plans(inst, list(combo))
        if not bad:
            best = min(best, obj.total)
    return best


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**5))
def test_branch_and_bound_matches_product(seed):
    inst = oracle.random_instance(seed)
    inst = dataclasses.replace(inst, tasks=inst.tasks[:2])
    res = oracle.exhaustive_schedule(inst)
    brute = _brute_optimum(inst)
    if not res.feasible:
        assert math.isinf(brute)
    else:
        assert res.objective.total == pytest.approx(brute, rel=1e-9)
        # the search's local life formula agrees with the trace-based one
        obj, bad = oracle.evaluate_plans(inst, res.plans)
        assert not bad and obj.total == pytest.approx(res.objective.total, rel=1e-9)


def test_scheduler_plans_are_valid_on_instances():
    for seed in range(30):
        inst = oracle.random_instance(seed)
        plans, _ = oracle.schedule_instance(inst)
        ok = [p for p in plans if p.status != "failed"]
        if len(ok) < len(plans):
            continue
        _, bad = oracle.evaluate_plans(inst, plans)
        assert not bad, (seed, bad)
        for p in ok:
            assert p.mode in (Mode.PCO_ONLY, Mode.HYBRID, Mode.ISL_ONLY)


def test_records_round_trip():
    inst = oracle.contention_instance()
    plans, _ = oracle.schedule_instance(inst)
    back = oracle.plans_from_records([p.to_record() for p in plans], inst)
    a, _ = oracle.evaluate_plans(inst, plans)
    b, _ = oracle.evaluate_plans(inst, back)
    assert a == b
