"""EO delivery tasks and their generation at a given traffic intensity."""

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constants import MEGABITS_PER_TB
from .constellation import ConfigurationError


class Urgency(str, Enum):
    ROUTINE = "routine"
    URGENT = "urgent"


@dataclass(frozen=True)
class Task:
    id: int
    origin_satellite: int
    volume: float  # Mb
    deadline: float  # minutes after creation
    created_at: float
    urgency: Urgency = Urgency.ROUTINE

    def __post_init__(self):
        if self.volume <= 0:
            raise ValueError("task %s: volume must be positive" % self.id)
        if self.deadline <= 0:
            raise ValueError("task %s: deadline must be positive" % self.id)

    @property
    def due(self):
        return self.created_at + self.deadline


# (lat_min, lat_max, lon_min, lon_max, weight).  Boxes are coarse land areas;
# weights follow population, so regions with many users and few stations
# (Africa, South and Southeast Asia) dominate the task stream.
LAND_REGIONS = {
    "north-america": ((25.0, 50.0, -125.0, -70.0), 1.0),
    "central-america": ((8.0, 25.0, -105.0, -80.0), 0.6),
    "south-america": ((-35.0, 5.0, -75.0, -40.0), 1.2),
    "europe": ((36.0, 55.0, -10.0, 30.0), 1.0),
    "west-africa": ((4.0, 16.0, -17.0, 15.0), 2.0),
    "east-africa": ((-12.0, 12.0, 25.0, 42.0), 2.0),
    "southern-africa": ((-34.0, -12.0, 15.0, 35.0), 1.0),
    "middle-east": ((15.0, 38.0, 35.0, 60.0), 1.0),
    "south-asia": ((8.0, 33.0, 68.0, 90.0), 3.0),
    "southeast-asia": ((-8.0, 20.0, 95.0, 125.0), 2.0),
    "east-asia": ((22.0, 45.0, 100.0, 122.0), 2.0),
    "australia": ((-38.0, -12.0, 115.0, 153.0), 0.4),
}

ORIGIN_PRESETS = ("uniform", "land-biased", "single-region")


@dataclass(frozen=True)
class ScenarioConfig:
    intensity_level: int = 3
    tasks_per_tick: int = 20
    deadline_range: tuple = (60.0, 180.0)
    urgent_fraction: float = 0.05
    urgent_deadline: float = 20.0
    seed: int = 0
    origin: str = "land-biased"
    region: str = "west-africa"
    volume_scale: float = 1.0

    def validate(self):
        if not 1 <= self.intensity_level <= 5:
            raise ConfigurationError("intensity level must be 1..5")
        if self.tasks_per_tick < 0:
            raise ConfigurationError("tasks_per_tick must be non-negative")
        lo, hi = self.deadline_range
        if not 0 < lo <= hi:
            raise ConfigurationError("deadline range must satisfy 0 < min <= max")
        if not 0.0 <= self.urgent_fraction <= 1.0:
            raise ConfigurationError("urgent_fraction must be a probability")
        if self.origin not in ORIGIN_PRESETS:
            raise ConfigurationError("unknown origin preset %r" % self.origin)
        if self.origin == "single-region" and self.region not in LAND_REGIONS:
            raise ConfigurationError("unknown region %r" % self.region)
        if self.volume_scale <= 0:
            raise ConfigurationError("volume_scale must be positive")


def nominal_volume_tb(level):
    if not 1 <= level <= 5:
        raise ConfigurationError("intensity level must be 1..5")
    return 2.0 * level


def task_volume(level, volume_scale=1.0):
    """Per-task volume in Mb: nominal TB for the level times volume_scale."""
    return nominal_volume_tb(level) * MEGABITS_PER_TB * volume_scale


def origin_weights(config: ScenarioConfig, lat, lon):
    """Sampling weight of every satellite given its sub-point."""
    lat = np.asarray(lat)
    lon = np.asarray(lon)
    if config.origin == "uniform":
        return np.ones(lat.shape)
    regions = LAND_REGIONS if config.origin == "land-biased" else {
        config.region: (LAND_REGIONS[config.region][0], 1.0)}
    w = np.zeros(lat.shape)
    for (la0, la1, lo0, lo1), weight in regions.values():
        inside = (lat >= la0) & (lat <= la1) & (lon >= lo0) & (lon <= lo1)
        if inside.any():
            # spread each region's weight over the satellites currently above it
            w = np.where(inside, w + weight / inside.sum(), w)
    return w


def generate_tasks(config: ScenarioConfig, oan, tick, rng, first_id=0):
    """Tasks created at `tick`; rng is a numpy Generator owned by the caller."""
    n = config.tasks_per_tick
    if n == 0:
        return []
    k = oan.index(tick)
    w = origin_weights(config, oan.lat[:, k], oan.lon[:, k])
    if w.sum() <= 0:
        w = np.ones_like(w)
    origins = rng.choice(len(w), size=n, p=w / w.sum())
    urgent = rng.random(n) < config.urgent_fraction
    lo, hi = config.deadline_range
    deadlines = np.round(rng.uniform(lo, hi, size=n))
    volume = task_volume(config.intensity_level, config.volume_scale)
    tasks = []
    for j in range(n):
        if urgent[j]:
            tasks.append(Task(first_id + j, int(origins[j]), volume, float(config.urgent_deadline),
                              float(tick), Urgency.URGENT))
        else:
            tasks.append(Task(first_id + j, int(origins[j]), volume, float(deadlines[j]),
                              float(tick), Urgency.ROUTINE))
    return tasks


def generate_stream(config: ScenarioConfig, oan, horizon, dt=1):
    """Every task of a run, drawn from one generator seeded by config.seed."""
    rng = np.random.default_rng(config.seed)
    tasks = []
    for tick in range(0, int(horizon), int(dt)):
        tasks.extend(generate_tasks(config, oan, tick, rng, first_id=len(tasks)))
    return tasks


CSV_FIELDS = ("id", "tick", "origin", "volume_mb", "deadline_min", "urgency")


def tasks_to_csv(tasks):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for t in tasks:
        w.writerow([t.id, repr(t.created_at), t.origin_satellite, repr(t.volume),
                    repr(t.deadline), t.urgency.value])
    return buf.getvalue()


def tasks_from_csv(text):
    rows = csv.DictReader(io.StringIO(text))
    missing = set(CSV_FIELDS) - set(rows.fieldnames or ())
    if missing:
        raise ConfigurationError("task CSV lacks columns: %s" % ", ".join(sorted(missing)))
    return [Task(int(r["id"]), int(r["origin"]), float(r["volume_mb"]), float(r["deadline_min"]),
                 float(r["tick"]), Urgency(r["urgency"])) for r in rows]
