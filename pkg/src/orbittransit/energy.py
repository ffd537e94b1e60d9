"""Battery ledger: depth of discharge, life consumption and the charge floor."""

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class EnergyParams:
    battery_max: float = 5000.0  # Wmin
    solar_power: float = 120.0  # W
    kappa: float = 0.08  # Wmin per Mb transmitted
    zeta: float = 2.51e-5  # Wmin per Mb stored, per tick
    min_fraction: float = 0.2

    def validate(self):
        if min(self.battery_max, self.solar_power, self.kappa, self.zeta) <= 0:
            raise ValueError("energy parameters must be positive")
        if not 0.0 <= self.min_fraction < 1.0:
            raise ValueError("min_fraction must lie in [0, 1)")

    @property
    def floor(self):
        return self.min_fraction * self.battery_max


@dataclass(frozen=True)
class BatteryState:
    level: float
    dod_prev: float = 0.0
    dod_curr: float = 0.0
    life_consumed: float = 0.0


def full_battery(params: EnergyParams):
    return BatteryState(params.battery_max)


def compute_dod(level, battery_max):
    if not 0.0 <= level <= battery_max:
        raise ValueError("level %r outside [0, %r]" % (level, battery_max))
    return (battery_max - level) / battery_max


def life_consumption(dod_prev, dod_curr):
    if dod_curr <= dod_prev:
        return 0.0
    return math.exp(dod_curr - dod_prev)


def step_energy(state: BatteryState, params: EnergyParams, sunlit, tx_volume, io_volume, dt=1.0):
    if tx_volume < 0 or io_volume < 0:
        raise ValueError("volumes must be non-negative")
    gain = params.solar_power * dt if sunlit else 0.0
    level = state.level + gain - params.kappa * tx_volume - params.zeta * io_volume
    level = min(max(level, 0.0), params.battery_max)
    dod = compute_dod(level, params.battery_max)
    return replace(state, level=level, dod_prev=state.dod_curr, dod_curr=dod,
                   life_consumed=state.life_consumed + life_consumption(state.dod_curr, dod))


def check_min_level(state: BatteryState, params: EnergyParams):
    return state.level / params.battery_max >= params.min_fraction


class BatteryBank:
    """Vectorised battery states for a whole constellation."""

    def __init__(self, n, params: EnergyParams, initial_fraction=1.0):
        self.params = params
        self.level = np.full(n, params.battery_max * initial_fraction)
        self.dod = (params.battery_max - self.level) / params.battery_max
        self.life = np.zeros(n)

    def step(self, sunlit, tx_volume, io_volume, dt=1.0):
        p = self.params
        gain = np.where(sunlit, p.solar_power * dt, 0.0)
        level = np.clip(self.level + gain - p.kappa * tx_volume - p.zeta * io_volume,
                        0.0, p.battery_max)
        dod = (p.battery_max - level) / p.battery_max
        inc = np.where(dod > self.dod, np.exp(dod - self.dod), 0.0)
        self.level, self.dod = level, dod
        self.life += inc
        return inc

    def state(self, sat):
        # dod_prev is not tracked per satellite in the bank
        return BatteryState(float(self.level[sat]), float(self.dod[sat]), float(self.dod[sat]),
                            float(self.life[sat]))


def project_levels(level0, gains, spends, battery_max):
    """Level after each of the given ticks under the charge ceiling.

    Solves L[k+1] = min(Bmax, L[k] + gains[k] - spends[k]) in closed form:
    with S the running sum of net inputs, L = S + min(L0, min_j<=k (Bmax - S_j)).
    The zero clamp is ignored; callers check against a positive floor.
    """
    x = np.asarray(gains, dtype=float) - np.asarray(spends, dtype=float)
    s = np.cumsum(x)
    cap = np.minimum.accumulate(battery_max - s)
    return s + np.minimum(level0, cap)
