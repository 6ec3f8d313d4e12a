import csv
import json
import subprocess
import sys

import pytest

from mapfsplit.cli import CSV_COLUMNS, main, trial_seed


def _csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def inst_files(tmp_path):
    inst = tmp_path / "inst.json"
    assert main(["gen", "--size", "16x16", "--obstacles", "0.1", "--agents", "8", "--seed", "3",
                 "--out", str(inst), "--map-out", str(tmp_path / "m.map"), "--scen-out", str(tmp_path / "s.scen")]) == 0
    return tmp_path


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen", "--size", "32x32", "--obstacles", "0.10", "--agents", "60", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0 and main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(json.loads(a.read_text())["robots"]) == 60


def test_gen_impossible_density(tmp_path, capsys):
    assert main(["gen", "--size", "4x4", "--obstacles", "0.5", "--agents", "30", "--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err


def test_solve_map_scen(inst_files, capsys):
    plan = inst_files / "plan.json"
    rc = main(["solve", "--map", str(inst_files / "m.map"), "--scen", str(inst_files / "s.scen"),
               "--agents", "5", "--solver", "ecbs", "--w", "1.5", "--out", str(plan)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "solved" and out["n"] == 5 and float(out["ratio_mk"]) >= 1
    assert float(out["solve_ms"]) >= 0 and float(out["overhead_ms"]) >= 0
    data = json.loads(plan.read_text())
    assert set(data) == {"horizon", "paths"} and len(data["paths"]) == 5


def test_solve_time_split_soc(inst_files, capsys):
    rc = main(["solve", "--instance", str(inst_files / "inst.json"), "--time-split", "4", "--objective", "soc"])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0 and out["subproblems"] == 4 and out["split"] == "4t" and out["objective"] == "soc"


def test_solve_missing_map(tmp_path, capsys):
    rc = main(["solve", "--map", str(tmp_path / "nope.map"), "--scen", str(tmp_path / "nope.scen")])
    assert rc == 1 and "no such file" in capsys.readouterr().err


def test_solve_timeout_exit_code(tmp_path, capsys):
    inst = tmp_path / "big.json"
    main(["gen", "--size", "48x48", "--agents", "150", "--seed", "2", "--out", str(inst)])
    assert main(["solve", "--instance", str(inst), "--solver", "cbs", "--timeout", "0"]) == 2


def test_validate_verbs(inst_files, capsys):
    inst = str(inst_files / "inst.json")
    plan = inst_files / "plan.json"
    assert main(["solve", "--instance", inst, "--out", str(plan)]) == 0
    assert main(["validate", "--instance", inst, "--plan", str(plan)]) == 0
    data = json.loads(plan.read_text())
    c, r = data["paths"][0][1]
    data["paths"][0][1] = [c + 2, r]  # teleport
    bad = inst_files / "bad.json"
    bad.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["validate", "--instance", inst, "--plan", str(bad)]) == 3
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"] and report["violations"]
    data["paths"] = data["paths"][:-1]
    bad.write_text(json.dumps(data))
    assert main(["validate", "--instance", inst, "--plan", str(bad)]) == 1


def test_bench_rows_and_summary(tmp_path):
    out = tmp_path / "runs.csv"
    rc = main(["bench", "--random", "16x16", "--agents", "10,20", "--trials", "2", "--solver", "cbs",
               "--splits", "none,2t", "--seed", "1", "--out", str(out)])
    assert rc == 0
    rows = _csv(out)
    assert len(rows) == 8 and list(rows[0]) == CSV_COLUMNS
    assert {r["split"] for r in rows} == {"none", "2t"}
    summary = _csv(tmp_path / "runs.summary.csv")
    assert len(summary) == 4 and all(s["runs"] == "2" for s in summary)


def _strip_wall(rows):
    return [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]


def test_bench_deterministic(tmp_path):
    args = ["bench", "--random", "16x16", "--agents", "8", "--trials", "2", "--splits", "none,2t,2x1s",
            "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert _strip_wall(_csv(tmp_path / "a.csv")) == _strip_wall(_csv(tmp_path / "b.csv"))


def test_bench_ratios_at_least_one(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["bench", "--random", "32x32", "--obstacles", "0.1", "--agents", "60", "--trials", "1",
                 "--w", "1.5", "--splits", "none,2t,4t", "--out", str(out)]) == 0
    for r in _csv(out):
        assert r["solved"] == "1" and float(r["ratio_mk"]) >= 1 and float(r["ratio_soc"]) >= 1


def test_bench_from_scenarios(inst_files):
    out = inst_files / "s.csv"
    assert main(["bench", "--map", str(inst_files / "m.map"), "--scen", str(inst_files / "s.scen"),
                 "--agents", "3,6", "--out", str(out)]) == 0
    assert [r["n"] for r in _csv(out)] == ["3", "6"]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("size: 12x12\nagents: 5\nseed: 9\nobstacles: 0.05\n")
    assert main(["--config", str(cfg), "gen"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["robots"]) == 5
    cfg.write_text("bogus: 1\n")
    assert main(["--config", str(cfg), "gen", "--size", "8x8", "--agents", "2"]) == 1


def test_trial_seed_stable():
    assert trial_seed(0, 10, 0) == trial_seed(0, 10, 0) != trial_seed(0, 10, 1)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mapfsplit", "gen", "--size", "8x8", "--agents", "3"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["width"] == 8
