import csv
import json
import os

import pytest

from orbittransit.cli import main


def test_help(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("gen", "run", "compare", "oracle", "report"):
        assert cmd in out


def test_gen_writes_parseable_file(tmp_path, capsys):
    path = tmp_path / "g.scn"
    assert main(["gen", "--preset", "toy-4x4", "--seed", "2", "-o", str(path)]) == 0
    assert "preset = toy-4x4" in path.read_text()


def test_run_uses_output_root(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORBITTRANSIT_OUT", str(tmp_path))
    assert main(["run", "toy", "--set", "engine.horizon=20"]) == 0
    dirs = os.listdir(tmp_path)
    assert dirs == ["toy-orbittransit-i3-s0"]
    summary = json.loads((tmp_path / dirs[0] / "summary.json").read_text())
    assert summary["strategy"] == "orbittransit" and summary["total_tasks"] == 20


def test_run_reports_config_errors(capsys):
    assert main(["run", "toy", "--set", "engine.nonsense=1"]) == 2
    assert main(["run", "toy", "--set", "engine.horizon"]) == 2
    assert "error" in capsys.readouterr().err


def test_compare_needs_two_strategies(tmp_path, capsys):
    assert main(["compare", "toy", "orbittransit", "--out", str(tmp_path)]) == 2


def test_compare_outputs(tmp_path, capsys):
    out = tmp_path / "cmp"
    code = main(["compare", "toy", "orbittransit", "nearest+isl_shortest", "--intensities", "1",
                 "2", "--set", "engine.horizon=15", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(open(out / "comparison.csv")))
    assert len(rows) == 4
    assert {r["strategy"] for r in rows} == {"orbittransit", "nearest+isl_shortest"}
    assert (out / "comparison.txt").exists()
    plots = sorted(os.listdir(out / "plots"))
    assert "success_ratio.csv" in plots and len(plots) == 6
    head = open(out / "plots" / "success_ratio.csv").readline().strip()
    assert head == "series,x,y"


def test_oracle_gap_zero_on_contention(tmp_path, capsys):
    js = tmp_path / "r.json"
    assert main(["oracle", "contention", "--json", str(js)]) == 0
    rep = json.loads(js.read_text())
    assert rep["feasible"] and rep["absolute_gap"] == pytest.approx(0.0)


def test_oracle_supplied_plans(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert main(["oracle", "contention", "--dump-instance", str(inst)]) == 0
    # valid but offloads a minute later than it could: positive gap
    plan = [{"task_id": 1, "mode": "hybrid", "gs": 0, "path": [3, 0], "t_isl": 10,
             "intervals": [[3, 0, 10], [0, 10, 16]], "gsl_events": [[3, 0], [0, 16]],
             "completion": 16, "status": "planned"}]
    pj = tmp_path / "plans.json"
    pj.write_text(json.dumps(plan))
    js = tmp_path / "r.json"
    assert main(["oracle", str(inst), str(pj), "--json", str(js)]) == 0
    assert json.loads(js.read_text())["absolute_gap"] > 0
    pj.write_text("[]")
    assert main(["oracle", str(inst), str(pj)]) == 1


def test_oracle_unknown_instance(capsys):
    assert main(["oracle", "/no/such/file.json"]) == 2
