from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from hflopt.cli import EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, main


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "sc.json"
    assert main(["generate", "--seed", "0", "--ues", "8", "--edges", "2", "--out", str(path)]) == EXIT_OK
    return path


def test_generate_then_optimize(tmp_path, scenario_file):
    out = tmp_path / "plan.json"
    code = main(["optimize", str(scenario_file), "--grid-max", "60", "--out", str(out)])
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["converged"] and doc["a_int"] >= 1 and doc["b_int"] >= 1
    assert doc["objective_s"] <= 1.02 * doc["grid_oracle"]["objective_s"]
    assert sorted(doc["association"]) == sorted(str(i) for i in range(8))


@pytest.mark.parametrize("strategy", ["proposed", "greedy", "random", "oracle"])
def test_associate(tmp_path, scenario_file, strategy):
    out = tmp_path / "a.json"
    assert main(["associate", str(scenario_file), "--strategy", strategy, "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["strategy"] == strategy and sum(doc["loads"]) == 8


def test_optimize_iteration_cap_exit_code(tmp_path, scenario_file):
    code = main(["optimize", str(scenario_file), "--max-iters", "1", "--out", str(tmp_path / "p.json")])
    assert code == EXIT_NOT_CONVERGED


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ues": [], "edges": [{}]}))
    assert main(["optimize", str(bad)]) == EXIT_INVALID
    assert "error" in capsys.readouterr().err
    assert main(["optimize", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_invalid_sweep_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"axis": "epsilon", "values": [2.0], "seeds": [0]}))
    assert main(["sweep", str(spec)]) == EXIT_INVALID


def test_sweep_deterministic(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"axis": "epsilon", "values": [0.5, 0.1], "seeds": [0, 1], "num_ues": 12, "num_edges": 2}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", str(spec), "--out", str(a)]) == EXIT_OK
    assert main(["sweep", str(spec), "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_simulate_writes_curve(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["simulate", "--seed", "1", "--dim", "6", "--ues", "8", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["round", "simulated_time_s", "global_loss", "gap"]
    gaps = [float(r[3]) for r in rows[1:]]
    assert gaps[0] == 1.0 and gaps[-1] <= 0.1
    times = [float(r[1]) for r in rows[1:]]
    assert times == sorted(times)


def test_simulate_round_cap(tmp_path):
    code = main(["simulate", "--a", "1", "--b", "1", "--max-rounds", "2", "--epsilon", "0.001",
                 "--out", str(tmp_path / "c.csv")])
    assert code == EXIT_NOT_CONVERGED


def test_check_small(tmp_path):
    out = tmp_path / "check.txt"
    code = main(["check", "--grid-points", "10", "--fd-stride", "9", "--scenarios", "2", "--out", str(out)])
    assert code == EXIT_OK
    text = out.read_text()
    assert "concavity: ok" in text and text.count("kkt seed=") == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hflopt.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "optimize" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hflopt.cli", "optimize"], capture_output=True, text=True)
    assert proc.returncode == EXIT_INVALID
