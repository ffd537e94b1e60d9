import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbittransit.constellation import ConfigurationError
from orbittransit.tasking import (ScenarioConfig, Task, Urgency, generate_stream, generate_tasks,
                                  nominal_volume_tb, origin_weights, task_volume, tasks_from_csv,
                                  tasks_to_csv)


def test_zero_tasks(toy_oan):
    cfg = ScenarioConfig(tasks_per_tick=0)
    assert generate_tasks(cfg, toy_oan, 0, np.random.default_rng(0)) == []


def test_level_five_volume():
    assert task_volume(5) == 8.0e7
    assert nominal_volume_tb(5) == 10.0


def test_same_seed_same_stream(toy_oan):
    cfg = ScenarioConfig(tasks_per_tick=3, seed=4)
    assert generate_stream(cfg, toy_oan, 20) == generate_stream(cfg, toy_oan, 20)


def test_different_seeds_differ(toy_oan):
    a = generate_stream(ScenarioConfig(tasks_per_tick=3, seed=1), toy_oan, 20)
    b = generate_stream(ScenarioConfig(tasks_per_tick=3, seed=2), toy_oan, 20)
    assert sorted((t.origin_satellite, t.deadline) for t in a) != \
        sorted((t.origin_satellite, t.deadline) for t in b)


def test_urgent_deadline(toy_oan):
    cfg = ScenarioConfig(tasks_per_tick=50, urgent_fraction=1.0)
    tasks = generate_tasks(cfg, toy_oan, 0, np.random.default_rng(0))
    assert all(t.urgency == Urgency.URGENT and t.deadline == 20.0 for t in tasks)


def test_routine_deadlines_in_range(toy_oan):
    tasks = generate_stream(ScenarioConfig(tasks_per_tick=5, urgent_fraction=0.0), toy_oan, 30)
    assert all(60.0 <= t.deadline <= 180.0 for t in tasks)


def test_single_region_origins(toy_oan):
    cfg = ScenarioConfig(origin="single-region", region="europe")
    w = origin_weights(cfg, toy_oan.lat[:, 0], toy_oan.lon[:, 0])
    assert (w >= 0).all()


def test_validation_errors():
    with pytest.raises(ConfigurationError):
        ScenarioConfig(intensity_level=6).validate()
    with pytest.raises(ConfigurationError):
        ScenarioConfig(origin="moon").validate()
    with pytest.raises(ValueError):
        Task(0, 0, -1.0, 10.0, 0.0)


def test_csv_round_trip(toy_oan):
    tasks = generate_stream(ScenarioConfig(tasks_per_tick=2), toy_oan, 5)
    assert tasks_from_csv(tasks_to_csv(tasks)) == tasks


@given(st.integers(1, 4))
def test_volume_monotone(level):
    assert task_volume(level + 1) > task_volume(level)
