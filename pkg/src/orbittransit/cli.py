"""Command-line front end.

    orbittransit gen      write a scenario for a constellation preset
    orbittransit run      execute one scenario and write its run directory
    orbittransit compare  run several strategies over the intensity sweep
    orbittransit oracle   compare plans with the exact optimum of a tiny instance
    orbittransit report   consolidated validation report (text and JSON)

Outputs go under $ORBITTRANSIT_OUT when set, otherwise ./runs.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import oracle, validation
from .baselines import SELECTIONS, ROUTINGS, StrategyId
from .constellation import PRESETS, ConfigurationError
from .engine import ConstraintViolation, DelayProfile
from .scenario import (BUNDLED, format_scenario, generate_scenario, load_scenario, output_root,
                       run_scenario)

EXIT_CONFIG = 2
EXIT_ASSERTION = 3

# headline metrics and the plot-data file each one feeds
PLOT_SERIES = {
    "success_ratio": "success_ratio.csv",
    "failed": "failed_tasks.csv",
    "max_gs_load_ratio": "gs_load_ratio.csv",
    "mean_path_hops": "path_length.csv",
    "life_consumption": "life_consumption.csv",
    "max_queue_delay_ms": "queue_delay.csv",
}


def _delay_arg(text):
    minutes, _, prob = text.partition(",")
    return DelayProfile(int(minutes), float(prob or 0.0))


def _apply_sets(sc, pairs):
    for item in pairs or ():
        key, eq, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not eq or not dot:
            raise ConfigurationError("--set expects section.key=value, got %r" % item)
        sc.set(section.strip(), name.strip(), value.strip())
    return sc


def _load(args):
    sc = load_scenario(args.scenario)
    _apply_sets(sc, getattr(args, "set", None))
    if getattr(args, "routing", None):
        sc.set("strategy", "routing", args.routing)
    if getattr(args, "selection", None):
        sc.set("strategy", "selection", args.selection)
    if getattr(args, "seed", None) is not None:
        sc.set("engine", "seed", args.seed)
    if getattr(args, "delay", None) is not None:
        sc.set("telemetry_delay", "minutes", args.delay.delay_minutes)
        sc.set("telemetry_delay", "probability", args.delay.probability)
    return sc


def cmd_gen(args):
    sc = generate_scenario(args.preset, args.seed)
    text = "# generated: preset %s, seed %d\n%s" % (args.preset, args.seed, format_scenario(sc))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(args.output)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args):
    sc = _load(args)
    strategy = sc.strategy()
    intensity = args.intensity or sc.get("tasks", "intensity")
    seed = sc.get("engine", "seed")
    out = args.out or os.path.join(output_root(), "%s-%s-i%d-s%d" % (
        sc.name, strategy.label.replace("+", "_"), intensity, seed))
    rec = run_scenario(sc, strategy, intensity=intensity, out_dir=out)
    sm = rec.summary
    print("%s: %d tasks, success %.4f, failed %d, life %.1f -> %s" % (
        strategy.label, sm["total_tasks"], sm["success_ratio"], sm["failed"],
        sm["life_consumption"], out))
    return 0


def comparison_rows(sc, strategies, intensities, seeds):
    rows = []
    for lvl in intensities:
        for label in strategies:
            sms = [run_scenario(sc, StrategyId.parse(label), intensity=lvl, seed=s).summary
                   for s in seeds]
            row = {"strategy": label, "intensity": lvl, "runs": len(sms)}
            for key in ("success_ratio", "max_gs_load_ratio", "mean_path_hops"):
                row[key] = float(np.mean([m[key] for m in sms]))
            row["life_consumption"] = float(np.sum([m["life_consumption"] for m in sms]))
            row["max_queue_delay_ms"] = float(np.max([m["max_queue_delay_ms"] for m in sms]))
            row["failed"] = int(sum(m["failed"] for m in sms))
            for reason in sms[0]["failures"]:
                row["fail_" + reason] = int(sum(m["failures"][reason] for m in sms))
            row["fallback_ratio"] = float(np.mean([m["fallback_ratio"] for m in sms]))
            rows.append(row)
    return rows


def _fmt_cell(v):
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([_fmt_cell(v) for v in r.values()])
    return buf.getvalue()


def rows_text(rows):
    cols = list(rows[0])
    cells = [[_fmt_cell(r[c]) for c in cols] for r in rows]
    width = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, width))]
    lines += ["  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(row, width)))
              for row in cells]
    return "\n".join(lines) + "\n"


def plot_data(rows):
    """{file name: csv text} with one (series, x, y) line per strategy and intensity."""
    out = {}
    for key, name in PLOT_SERIES.items():
        buf = io.StringIO()
        buf.write("series,x,y\n")
        for r in rows:
            buf.write("%s,%d,%s\n" % (r["strategy"], r["intensity"], _fmt_cell(r[key])))
        out[name] = buf.getvalue()
    return out


def cmd_compare(args):
    if len(args.strategies) < 2:
        print("compare needs at least two strategies", file=sys.stderr)
        return EXIT_CONFIG
    for s in args.strategies:
        StrategyId.parse(s)
    sc = _load(args)
    intensities = args.intensities or sc.intensities()
    seeds = args.seeds or (sc.get("engine", "seed"),)
    rows = comparison_rows(sc, args.strategies, intensities, seeds)
    out = args.out or os.path.join(output_root(), "%s-compare" % sc.name)
    os.makedirs(os.path.join(out, "plots"), exist_ok=True)
    text = rows_text(rows)
    with open(os.path.join(out, "comparison.csv"), "w", newline="") as fh:
        fh.write(rows_csv(rows))
    with open(os.path.join(out, "comparison.txt"), "w") as fh:
        fh.write(text)
    for name, body in plot_data(rows).items():
        with open(os.path.join(out, "plots", name), "w", newline="") as fh:
            fh.write(body)
    sys.stdout.write(text)
    return 0


def _instance(name):
    if name == "contention":
        return oracle.contention_instance()
    if name == "single-task":
        return oracle.single_task_instance()
    if name.startswith("random:"):
        return oracle.random_instance(int(name.split(":", 1)[1]))
    with open(name) as fh:
        return oracle.TinyInstance.from_json(fh.read())


def _objective(obj):
    if obj is None:
        return None
    return {"life": obj.life_term, "delay": obj.delay_term, "total": obj.total}


def oracle_report(inst, plans):
    opt = oracle.exhaustive_schedule(inst)
    if not opt.feasible:
        return {"feasible": False, "message": "instance has no feasible plan set"}
    if not plans:
        return {"feasible": False, "optimum": _objective(opt.objective),
                "message": "empty plan set: comparison infeasible"}
    gap = oracle.compare(inst, plans, opt)
    _, bad = oracle.evaluate_plans(inst, plans)
    return {"feasible": not bad, "optimum": _objective(opt.objective),
            "supplied": _objective(gap.heuristic), "absolute_gap": gap.absolute,
            "relative_gap": gap.relative, "violations": bad,
            "optimal_plans": [p.to_record() for p in opt.plans]}


def cmd_oracle(args):
    inst = _instance(args.instance)
    oracle.check_bounds(inst)
    if args.dump_instance:
        with open(args.dump_instance, "w") as fh:
            fh.write(inst.to_json())
    if args.plans:
        with open(args.plans) as fh:
            plans = oracle.plans_from_records(json.load(fh), inst)
    else:
        plans, _ = oracle.schedule_instance(inst)
    rep = oracle_report(inst, plans)
    for key in ("optimum", "supplied"):
        if rep.get(key):
            print("%-9s objective %.6f (life %.6f, delay %.3f)" % (
                key, rep[key]["total"], rep[key]["life"], rep[key]["delay"]))
    if "absolute_gap" in rep:
        rel = rep["relative_gap"]
        print("gap       absolute %s, relative %s" % (
            _fmt_cell(rep["absolute_gap"]), "inf" if math.isinf(rel) else "%.6f" % rel))
    for msg in rep.get("violations", []):
        print("violation", msg)
    if "message" in rep:
        print(rep["message"])
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rep, fh, indent=1, sort_keys=True, default=str)
    return 0 if rep.get("feasible") else 1


def cmd_report(args):
    text, data = validation.report(full=args.full)
    out = args.out or os.path.join(output_root(), "report")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(text)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True, default=str)
    sys.stdout.write(text)
    return 0 if all(v["passed"] for v in data.values()) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="orbittransit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a scenario file for a preset")
    g.add_argument("--preset", default="toy-4x4", choices=sorted(PRESETS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", help="file to write (default: stdout)")
    g.set_defaults(func=cmd_gen)

    def scenario_args(q):
        q.add_argument("scenario", help="scenario file or bundled name (%s)" % ", ".join(BUNDLED))
        q.add_argument("--seed", type=int, help="override [engine] seed")
        q.add_argument("--delay", type=_delay_arg, metavar="MIN,PROB",
                       help="telemetry delay profile, e.g. 20,0.3")
        q.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any scenario key (repeatable)")
        q.add_argument("--out", help="output directory")

    r = sub.add_parser("run", help="execute one scenario")
    scenario_args(r)
    r.add_argument("--selection", choices=SELECTIONS)
    r.add_argument("--routing", choices=ROUTINGS)
    r.add_argument("--intensity", type=int, choices=range(1, 6))
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare strategies over the intensity sweep")
    scenario_args(c)
    c.add_argument("strategies", nargs="+",
                   help="orbittransit or SELECTION+ROUTING, e.g. nearest+isl_shortest")
    c.add_argument("--intensities", type=int, nargs="+")
    c.add_argument("--seeds", type=int, nargs="+")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", help="gap of a plan set against the exact optimum")
    o.add_argument("instance", help="instance JSON, or contention / single-task / random:SEED")
    o.add_argument("plans", nargs="?", help="plans JSON (default: the scheduler's own plans)")
    o.add_argument("--json", help="also write the report as JSON")
    o.add_argument("--dump-instance", help="write the instance JSON here")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("report", help="run the validation checks")
    v.add_argument("--full", action="store_true", help="include the full-scale runs")
    v.add_argument("--out", help="output directory")
    v.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, oracle.OversizeInstance, OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ConstraintViolation as exc:
        print("constraint assertion failed: %s" % exc, file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
