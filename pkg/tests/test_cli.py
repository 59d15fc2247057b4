from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from bihermitian.cli import OUTPUT_ENV, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_solve_writes_report_and_csv(tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--config", str(CONFIGS / "torus_random.json"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and "xi" in report and report["verdicts"]
    with open(out / "u.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["axis0", "axis1", "axis2", "axis3", "value"]
    assert len(rows) == 8 ** 4 + 1
    assert float(rows[1][4]) == float(repr(float(rows[1][4])))


def test_report_is_deterministic(tmp_path):
    cfg = str(CONFIGS / "torus_prescribe.json")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert "created" in meta and "wall_time_s" in meta


def test_hopf_flatten_config(tmp_path):
    out = tmp_path / "flat"
    assert main(["solve", "--config", str(CONFIGS / "hopf_flatten.json"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["extra"]["flatness_residual"] < 1e-6


def test_hopf_brackets_csv(tmp_path):
    out = tmp_path / "hb"
    assert main(["hopf", "--alpha", "1", "--beta", "2", "--check", "brackets",
                 "--out", str(out)]) == 0
    with open(out / "brackets.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "bracket", "c_t"]
    for t, b, ct in rows[1:]:
        assert abs(float(b) - float(ct)) < 1e-3 * abs(float(ct))


def test_unknown_backend_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {"backend": {"kind": "sphere"}})
    assert main(["solve", "--config", path]) == 3
    assert "backend.kind" in capsys.readouterr().err


def test_unknown_keys_listed(tmp_path, capsys):
    path = _write(tmp_path, {"backend": {"kind": "torus4d", "bogus": 1}})
    assert main(["solve", "--config", path]) == 3
    assert "bogus" in capsys.readouterr().err
    path = _write(tmp_path, {"backend": {"kind": "torus4d"},
                             "problem": {"F": {"kind": "random", "sede": 1}}})
    assert main(["solve", "--config", path]) == 3
    assert "sede" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env-out"))
    path = _write(tmp_path, {
        "backend": {"kind": "torus4d", "sizes": 6},
        "problem": {"kind": "nonlinear", "p": 0.5, "q": 1.0,
                    "F": {"kind": "random", "seed": 1, "amplitude": 0.8}},
        "solver": {"max_newton": 1, "max_halvings": 0}})
    assert main(["solve", "--config", path]) == 2
    report = json.loads((tmp_path / "env-out" / "report.json").read_text())
    assert report["error"] == "SolverFailure"


def test_expression_field(tmp_path):
    out = tmp_path / "expr"
    path = _write(tmp_path, {"backend": {"kind": "torus4d", "sizes": 8},
                             "problem": {"kind": "linear",
                                         "F": {"kind": "expression",
                                               "expr": "0.2*sin(2*pi*x2)"}}})
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    bad = _write(tmp_path, {"backend": {"kind": "torus4d", "sizes": 8},
                            "problem": {"F": {"kind": "expression", "expr": "z + 1"}}}, "bad.json")
    assert main(["solve", "--config", bad, "--out", str(out)]) == 3


@pytest.mark.parametrize("command", ["gauduchon", "ricci", "bracket", "decompose"])
def test_other_subcommands(tmp_path, command):
    cfg = CONFIGS / ("torus_decompose.json" if command != "ricci" else "hopf_flatten.json")
    out = tmp_path / command
    assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == command
    if command == "decompose":
        assert report["rA"] == pytest.approx(2.0) and report["rB"] == pytest.approx(3.0)


def test_preset_flag(tmp_path, capsys):
    assert main(["--preset", "A7", "--out", str(tmp_path)]) == 0
    assert "A7 PASS" in capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["criteria"][0]["name"] == "A7"
    assert main(["report", "--preset", "A99", "--out", str(tmp_path)]) == 3


def test_csv_round_trip(tmp_path):
    out = tmp_path / "inoue"
    assert main(["solve", "--config", str(CONFIGS / "inoue_flatten.json"), "--out", str(out)]) == 0
    data = np.loadtxt(out / "omega_u_plus.csv", delimiter=",", skiprows=1)
    y, val = data[:, 0], data[:, 1]
    assert np.allclose(val, 2.0 / y ** 2, rtol=1e-15)
