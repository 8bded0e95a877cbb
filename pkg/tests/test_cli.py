import csv
import json
import subprocess
import sys

import pytest

from cavityaqc import cli
from conftest import DATA

TLS = {"kind": "TLS", "b_x": 1.0, "j0": 0.1}
TLS_CAV = {"delta_c": -0.05, "kappa": 0.1, "g": 0.075}


def _write(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestStationary:
    def test_sweep_and_bifurcations(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": TLS_CAV,
                                "sweep": {"control": "epsilon", "lo": 0.2, "hi": 0.5, "n": 31}})
        out = tmp_path / "o"
        assert cli.run(["stationary", "--config", cfg, "--out", str(out)]) == 0
        rows = _rows(out / "sweep.csv")
        assert rows[0] == ["control", "x_ss", "b_eff", "stability"]
        assert {r[3] for r in rows[1:]} == {"Stable", "Unstable"}
        bifs = json.loads((out / "bifurcations.json").read_text())["points"]
        assert [round(b["control_value"], 2) for b in bifs] == [0.31, 0.35]
        man = json.loads((out / "manifest.json").read_text())
        assert man["status"] == "ok" and "sweep.csv" in man["files"]

    def test_uncoupled_has_no_bifurcations(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": {**TLS_CAV, "g": 0.0},
                                "sweep": {"control": "epsilon", "lo": 0.0, "hi": 1.0, "n": 5}})
        assert cli.run(["stationary", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "bifurcations.json").read_text())["points"] == []

    def test_needs_sweep(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": TLS_CAV})
        assert cli.run(["stationary", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_positive_detuning_rejected(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": {**TLS_CAV, "delta_c": 0.05},
                                "sweep": {"control": "epsilon", "lo": 0.0, "hi": 1.0, "n": 5}})
        assert cli.run(["stationary", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestProtocol:
    def _cfg(self, tmp_path, **schedule):
        return _write(tmp_path, {"model": TLS, "cavity": TLS_CAV,
                                 "schedule": {"control": "epsilon", **schedule}})

    def test_single_run(self, tmp_path):
        out = tmp_path / "o"
        assert cli.run(["protocol", "--config", self._cfg(tmp_path, eps_mid=0.36), "--out", str(out)]) == 0
        summary = json.loads((out / "protocol.json").read_text())
        assert summary["lambda_c"] > 0 and summary["terminated"] == "settled"
        rows = _rows(out / "trajectory.csv")
        assert rows[0] == ["t", "a_re", "a_im", "x_a", "X", "b_eff", "p_exc"]
        assert (out / "trajectory.csv").read_bytes().count(b"\r\n") == len(rows)

    def test_sweep_is_deterministic_across_workers(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": TLS_CAV, "schedule": {"control": "epsilon"},
                                "sweep": {"control": "epsilon", "values": [0.34, 0.36, 0.37]}})
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.run(["protocol", "--config", cfg, "--out", str(a)]) == 0
        assert cli.run(["protocol", "--config", cfg, "--out", str(b), "--workers", "2"]) == 0
        for name in ("protocol.json", "summary.csv", "trajectories/trajectory_002.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        assert len(json.loads((a / "protocol.json").read_text())) == 3

    def test_integration_failure_exit_code(self, tmp_path):
        out = tmp_path / "o"
        code = cli.run(["protocol", "--config", self._cfg(tmp_path, eps_mid=0.36), "--out", str(out),
                        "--dt", "50"])
        assert code == 3
        man = json.loads((out / "manifest.json").read_text())
        assert man["status"] == "integration_error" and man["failures"]

    def test_empty_result_exit_code(self, tmp_path):
        # with no drive the requested detuning schedule has no solution
        cfg = _write(tmp_path, {"model": TLS, "cavity": {**TLS_CAV, "epsilon": 0.0},
                                "schedule": {"control": "delta_c", "delta_mid": -0.05}})
        assert cli.run(["protocol", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_needs_mid(self, tmp_path):
        assert cli.run(["protocol", "--config", self._cfg(tmp_path), "--out", str(tmp_path)]) == 1

    def test_sweep_control_must_match(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": TLS_CAV, "schedule": {"control": "epsilon"},
                                "sweep": {"control": "delta_c", "values": [-0.1]}})
        assert cli.run(["protocol", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestAnalyze:
    def test_report(self, tmp_path):
        cfg = _write(tmp_path, {"model": TLS, "cavity": TLS_CAV})
        out = tmp_path / "o"
        assert cli.run(["analyze", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "feasibility.json").read_text())
        assert rep["alpha_over_g2"] == pytest.approx(8.88888888889)
        assert rep["passed"] and len(rep["bifurcations"]) == 2
        assert len(_rows(out / "observables.csv")) == 202


class TestEC:
    def test_instance_file(self, tmp_path, capsys):
        assert cli.run(["ec", "--instance", str(DATA / "ec6.txt"), "--out", str(tmp_path)]) == 0
        assert "100001" in capsys.readouterr().out
        rep = json.loads((tmp_path / "ec.json").read_text())
        assert rep["solutions"] == ["100001"] and rep["violation_histogram"]["0"] == 1

    def test_generate(self, tmp_path):
        assert cli.run(["ec", "--generate", "6", "5", "--seed", "7", "--unique", "--out", str(tmp_path)]) == 0
        assert len(json.loads((tmp_path / "ec.json").read_text())["solutions"]) == 1

    def test_generation_failure(self):
        assert cli.run(["ec", "--generate", "4", "5", "--seed", "0"]) == 1

    def test_duplicate_clause(self, tmp_path):
        p = tmp_path / "dup.txt"
        p.write_text("1 2 3\n3 2 1\n")
        assert cli.run(["ec", "--instance", str(p)]) == 1

    def test_missing_source(self):
        assert cli.run(["ec"]) == 1


class TestPresetCommand:
    def test_list(self, capsys):
        assert cli.run(["preset", "--list"]) == 0
        assert "fig2" in capsys.readouterr().out.split()

    def test_unknown(self):
        assert cli.run(["preset", "nope"]) == 1

    def test_analyze_preset(self, tmp_path):
        assert cli.run(["preset", "analyze_tfim", "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "feasibility.json").read_text())
        assert rep["alpha_over_g2"] == pytest.approx(92.0634920635)

    def test_stationary_preset(self, tmp_path):
        assert cli.run(["preset", "fig5a", "--out", str(tmp_path)]) == 0
        bifs = json.loads((tmp_path / "bifurcations.json").read_text())["points"]
        assert [round(b["control_value"], 3) for b in bifs] == [-0.155, -0.139]

    def test_bad_config_path(self, tmp_path):
        assert cli.run(["analyze", "--config", str(tmp_path / "missing.json")]) == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "cavityaqc.cli", "preset", "--list"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and "fig1" in proc.stdout
