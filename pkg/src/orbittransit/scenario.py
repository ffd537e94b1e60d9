"""Scenario files: sectioned key=value text, plus the run wrapper.

A scenario names a constellation, a station set, a task stream, energy and
engine parameters, a strategy, an optional telemetry delay and a fault list.
Every key has a default, so an empty section is valid.  Unknown sections or
keys are rejected with the offending line number.
"""

import math
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .baselines import StrategyId
from .constellation import PRESETS, ConfigurationError, ConstellationConfig, generate_walker
from .energy import EnergyParams
from .engine import DelayProfile, FaultEntry, Simulation, SurgeEntry
from .oan import build_oan
from .scheduler import SchedulerConfig
from .tasking import ScenarioConfig, generate_stream
from .topology import GroundStation, load_catalog


class ScenarioError(ConfigurationError):
    def __init__(self, message, line=None, source="<scenario>"):
        self.line = line
        where = "%s line %d: " % (source, line) if line else "%s: " % source
        super().__init__(where + message)


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got %r" % v)


def _str(v):
    return v


def _opt_int(v):
    return None if v.lower() in ("none", "") else int(v)


def _opt_float(v):
    return None if v.lower() in ("none", "") else float(v)


def _ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


# section -> key -> (parser, default); the defaults describe the reference setup
SCHEMA = {
    "constellation": {
        "preset": (_str, "starlink-s1"),
        "num_orbits": (_opt_int, None),
        "sats_per_orbit": (_opt_int, None),
        "altitude_km": (_opt_float, None),
        "inclination_deg": (_opt_float, None),
        "storage_capacity_mb": (_float, 8.0e6),
        "link_capacity_mbps": (_float, 1000.0),
        "elevation_deg": (_float, 25.0),
    },
    "stations": {
        # "bundled", "none", a bundled file name or a path relative to the scenario
        "catalog": (_str, "bundled"),
        "capacity_scale": (_float, 1.0),
    },
    "tasks": {
        "intensity": (_int, 3),
        "sweep": (_ints, ()),
        "tasks_per_tick": (_int, 40),
        "volume_scale": (_float, 2.5e-4),
        "deadline_min": (_float, 60.0),
        "deadline_max": (_float, 180.0),
        "urgent_fraction": (_float, 0.05),
        "urgent_deadline": (_float, 20.0),
        "origin": (_str, "land-biased"),
        "region": (_str, "west-africa"),
    },
    "energy": {
        "battery_max": (_float, 5000.0),
        "solar_power": (_float, 120.0),
        "kappa": (_float, 0.08),
        "zeta": (_float, 2.51e-5),
        "min_fraction": (_float, 0.2),
        "initial_fraction": (_float, 1.0),
    },
    "engine": {
        "horizon": (_int, 360),
        "dt": (_int, 1),
        "seed": (_int, 0),
        "check": (_bool, True),
    },
    "strategy": {
        "selection": (_str, "nearest"),
        "routing": (_str, "orbittransit"),
        "max_offset": (_opt_int, None),
        "candidate_cap": (_int, 30),
        "probe_budget": (_int, 150),
        "use_flow": (_bool, True),
    },
    "telemetry_delay": {
        "minutes": (_int, 0),
        "probability": (_float, 0.0),
    },
    "faults": {
        "random_count": (_int, 0),
        "random_duration": (_int, 30),
        "random_seed": (_int, 0),
    },
}

# keys with a numeric suffix, allowed any number of times
_INDEXED = {
    ("stations", "gs"): "id = lat, lon, capacity_mbps, antennas",
    ("faults", "fault"): "n = satellite, start, end",
    ("faults", "surge"): "n = gs_id, start, end",
}
_INDEXED_RE = re.compile(r"^([a-z]+)(\d+)$")


@dataclass
class Scenario:
    values: dict = field(default_factory=dict)  # section -> key -> parsed value
    stations: dict = field(default_factory=dict)  # id -> (lat, lon, capacity, antennas)
    faults: dict = field(default_factory=dict)  # n -> (sat, start, end)
    surges: dict = field(default_factory=dict)  # n -> (gs, start, end)
    name: str = "scenario"
    base_dir: str = "."

    def get(self, section, key):
        if key in self.values.get(section, {}):
            return self.values[section][key]
        return SCHEMA[section][key][1]

    def set(self, section, key, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ScenarioError("unknown key %s.%s" % (section, key))
        if isinstance(value, str):
            value = SCHEMA[section][key][0](value)
        self.values.setdefault(section, {})[key] = value

    def with_values(self, **overrides):
        """Copy with 'section.key' style overrides given as section__key=value."""
        out = Scenario({s: dict(v) for s, v in self.values.items()}, dict(self.stations),
                       dict(self.faults), dict(self.surges), self.name, self.base_dir)
        for name, value in overrides.items():
            section, _, key = name.partition("__")
            out.set(section, key, value)
        return out

    # -- derived objects ------------------------------------------------

    def constellation_config(self):
        preset = self.get("constellation", "preset")
        if preset not in PRESETS and preset != "custom":
            raise ScenarioError("unknown preset %r" % preset)
        base = PRESETS.get(preset, ConstellationConfig(1, 1))
        fields = {}
        for key in ("num_orbits", "sats_per_orbit", "altitude_km", "inclination_deg"):
            v = self.get("constellation", key)
            if v is not None:
                fields[key] = v
        cfg = replace(base, storage_capacity=self.get("constellation", "storage_capacity_mb"),
                      link_capacity=self.get("constellation", "link_capacity_mbps"), **fields)
        cfg.validate()
        return cfg

    def station_list(self):
        cat = self.get("stations", "catalog")
        if cat == "none":
            stations = []
        elif cat == "bundled":
            stations = load_catalog()
        else:
            path = cat if os.path.isabs(cat) else os.path.join(self.base_dir, cat)
            if not os.path.exists(path):
                path = str(resources.files("orbittransit.data").joinpath(cat))
            stations = load_catalog(path)
        for gid, (lat, lon, cap, ant) in sorted(self.stations.items()):
            stations.append(GroundStation(gid, lat, lon, cap, ant, "inline"))
        scale = self.get("stations", "capacity_scale")
        if scale != 1.0:
            stations = [replace(g, capacity=g.capacity * scale) for g in stations]
        ids = [g.id for g in stations]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate station ids")
        if not stations:
            raise ScenarioError("scenario has no ground stations")
        return stations

    def task_config(self, intensity=None, seed=None):
        g = lambda k: self.get("tasks", k)
        cfg = ScenarioConfig(intensity_level=intensity or g("intensity"),
                             tasks_per_tick=g("tasks_per_tick"),
                             deadline_range=(g("deadline_min"), g("deadline_max")),
                             urgent_fraction=g("urgent_fraction"),
                             urgent_deadline=g("urgent_deadline"),
                             seed=self.get("engine", "seed") if seed is None else seed,
                             origin=g("origin"), region=g("region"),
                             volume_scale=g("volume_scale"))
        cfg.validate()
        return cfg

    def energy_params(self):
        e = lambda k: self.get("energy", k)
        p = EnergyParams(e("battery_max"), e("solar_power"), e("kappa"), e("zeta"),
                         e("min_fraction"))
        p.validate()
        return p

    def strategy(self):
        return StrategyId(self.get("strategy", "selection"), self.get("strategy", "routing"))

    def delay_profile(self):
        return DelayProfile(self.get("telemetry_delay", "minutes"),
                            self.get("telemetry_delay", "probability"))

    def visibility_horizon(self):
        tail = max(self.get("tasks", "deadline_max"), self.get("tasks", "urgent_deadline"))
        return self.get("engine", "horizon") + int(math.ceil(tail)) + 1

    def fault_entries(self, num_sats):
        out = [FaultEntry(*v) for _, v in sorted(self.faults.items())]
        count = self.get("faults", "random_count")
        if count:
            rng = np.random.default_rng([self.get("faults", "random_seed"), 7])
            dur = self.get("faults", "random_duration")
            hi = max(self.get("engine", "horizon") - dur, 1)
            for s, start in zip(rng.choice(num_sats, size=count, replace=count > num_sats),
                                rng.integers(0, hi, size=count)):
                out.append(FaultEntry(int(s), int(start), int(start) + dur))
        return out

    def surge_entries(self):
        return [SurgeEntry(*v) for _, v in sorted(self.surges.items())]

    def scheduler_config(self):
        s = lambda k: self.get("strategy", k)
        return SchedulerConfig(energy=self.energy_params(), dt=self.get("engine", "dt"),
                               max_offset=s("max_offset"), candidate_cap=s("candidate_cap"),
                               probe_budget=s("probe_budget"), use_flow=s("use_flow"))

    def intensities(self):
        return self.get("tasks", "sweep") or (self.get("tasks", "intensity"),)


def _parse_tuple(text, types):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != len(types):
        raise ValueError("expected %d comma-separated fields" % len(types))
    return tuple(t(p) for t, p in zip(types, parts))


def parse_scenario(text, source="<scenario>", base_dir="."):
    sc = Scenario(name=os.path.splitext(os.path.basename(source))[0].strip("<>") or "scenario",
                  base_dir=base_dir)
    section = None
    seen = set()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("malformed section header", n, source)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ScenarioError("unknown section [%s]" % section, n, source)
            continue
        if "=" not in line:
            raise ScenarioError("expected key = value", n, source)
        if section is None:
            raise ScenarioError("key outside any section", n, source)
        key, _, value = (p.strip() for p in line.partition("="))
        if (section, key) in seen:
            raise ScenarioError("duplicate key %r" % key, n, source)
        seen.add((section, key))
        m = _INDEXED_RE.match(key)
        try:
            if key in SCHEMA[section]:
                sc.set(section, key, value)
            elif m and (section, m.group(1)) in _INDEXED:
                idx = int(m.group(2))
                if m.group(1) == "gs":
                    sc.stations[idx] = _parse_tuple(value, (float, float, float, int))
                elif m.group(1) == "fault":
                    sc.faults[idx] = _parse_tuple(value, (int, int, int))
                else:
                    sc.surges[idx] = _parse_tuple(value, (int, int, int))
            else:
                raise ScenarioError("unknown key %r in [%s]" % (key, section), n, source)
        except ScenarioError as exc:
            if exc.line is None:
                raise ScenarioError(str(exc).split(": ", 1)[-1], n, source) from None
            raise
        except ValueError as exc:
            raise ScenarioError("bad value for %r: %s" % (key, exc), n, source) from None
    return sc


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_scenario(sc: Scenario, full=True):
    """Normalized text; with full=True every key is written, defaults included."""
    out = []
    for section, keys in SCHEMA.items():
        lines = []
        for key in keys:
            if full or key in sc.values.get(section, {}):
                lines.append("%s = %s" % (key, _fmt_value(sc.get(section, key))))
        if section == "stations":
            lines += ["gs%d = %s" % (i, _fmt_value(v)) for i, v in sorted(sc.stations.items())]
        if section == "faults":
            lines += ["fault%d = %s" % (i, _fmt_value(v)) for i, v in sorted(sc.faults.items())]
            lines += ["surge%d = %s" % (i, _fmt_value(v)) for i, v in sorted(sc.surges.items())]
        if lines:
            out.append("[%s]" % section)
            out += lines
            out.append("")
    return "\n".join(out)


def load_scenario(path):
    if path in BUNDLED:
        return bundled_scenario(path)
    with open(path) as fh:
        return parse_scenario(fh.read(), str(path), os.path.dirname(os.path.abspath(path)))


BUNDLED = ("reference", "toy", "hotspot-toy", "wildfire")


def bundled_scenario(name):
    if name not in BUNDLED:
        raise ScenarioError("unknown bundled scenario %r" % name)
    text = resources.files("orbittransit.data").joinpath(name + ".scn").read_text()
    sc = parse_scenario(text, name + ".scn")
    sc.name = name
    return sc


def generate_scenario(preset="toy-4x4", seed=0):
    """A complete scenario for one of the constellation presets."""
    if preset not in PRESETS:
        raise ScenarioError("unknown preset %r (choose from %s)" % (preset, ", ".join(PRESETS)))
    sc = Scenario(name=preset)
    sc.set("constellation", "preset", preset)
    sc.set("engine", "seed", int(seed))
    if preset == "toy-4x4":
        # small enough for quick runs: 16 satellites, light traffic
        sc.set("tasks", "tasks_per_tick", 1)
        sc.set("tasks", "volume_scale", 2.5e-5)
        sc.set("tasks", "deadline_min", 120.0)
        sc.set("tasks", "deadline_max", 180.0)
        sc.set("engine", "horizon", 120)
    return sc


# -- running ----------------------------------------------------------------

_GRAPH_CACHE = {}


def build_graph(sc: Scenario):
    """Visibility graph for the scenario, cached per geometry."""
    cfg = sc.constellation_config()
    stations = sc.station_list()
    key = (cfg, tuple(stations), sc.visibility_horizon(), sc.get("engine", "dt"),
           sc.get("constellation", "elevation_deg"))
    oan = _GRAPH_CACHE.get(key)
    if oan is None:
        sats = generate_walker(cfg)
        oan = build_oan(sats, stations, key[2], step=int(key[3]), threshold_deg=key[4])
        _GRAPH_CACHE.clear()
        _GRAPH_CACHE[key] = oan
    return oan


def run_scenario(sc: Scenario, strategy=None, intensity=None, seed=None, out_dir=None,
                 delay=None):
    """Execute one run; writes the output files when out_dir is given."""
    oan = build_graph(sc)
    seed = sc.get("engine", "seed") if seed is None else seed
    tcfg = sc.task_config(intensity, seed)
    horizon = sc.get("engine", "horizon")
    tasks = generate_stream(tcfg, oan, horizon, sc.get("engine", "dt"))
    energy = sc.energy_params()
    cfg = sc.constellation_config()
    sim = Simulation(oan, tasks, strategy or sc.strategy(), energy=energy,
                     storage_capacity=cfg.storage_capacity, horizon=horizon,
                     dt=sc.get("engine", "dt"),
                     delay=sc.delay_profile() if delay is None else delay,
                     faults=sc.fault_entries(oan.grid.size), surges=sc.surge_entries(),
                     scheduler_config=sc.scheduler_config(),
                     initial_fraction=sc.get("energy", "initial_fraction"), seed=seed,
                     check=sc.get("engine", "check"))
    rec = sim.run()
    rec.summary["intensity"] = tcfg.intensity_level
    rec.summary["scenario"] = sc.name
    if out_dir is not None:
        rec.write(out_dir)
    return rec


def output_root(default="runs"):
    return os.environ.get("ORBITTRANSIT_OUT", default)
