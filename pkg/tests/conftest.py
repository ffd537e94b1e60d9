import numpy as np
import pytest

from orbittransit.constellation import PRESETS, generate_walker
from orbittransit.energy import EnergyParams
from orbittransit.oan import OanGraph, build_oan
from orbittransit.scheduler import Ledger, RealView, Scheduler, SchedulerConfig
from orbittransit.topology import GroundStation, load_catalog


@pytest.fixture(scope="session")
def toy_sats():
    return generate_walker(PRESETS["toy-4x4"])


@pytest.fixture(scope="session")
def toy_oan(toy_sats):
    return build_oan(toy_sats, load_catalog(), 240)


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


def stations(*caps):
    return [GroundStation(k, 0.0, 0.0, float(c)) for k, c in enumerate(caps)]


def window_graph(windows, caps=(1000.0,), orbits=3, per_orbit=3, horizon=60, dark=()):
    return OanGraph.from_windows(orbits, per_orbit, stations(*caps), horizon, windows, dark=dark)


def make_scheduler(oan, storage=8.0e6, energy=None, levels=None, **cfg):
    p = energy or EnergyParams()
    ledger = Ledger(oan, p, storage)
    lv = np.full(oan.grid.size, p.battery_max) if levels is None else np.asarray(levels, float)
    sched = Scheduler(oan, ledger, SchedulerConfig(energy=p, **cfg), RealView(ledger, lv))
    return sched
