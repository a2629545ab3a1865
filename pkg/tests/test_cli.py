import json
import math
import subprocess
import sys

import numpy as np
import pytest

from divergence_lab import cli, scenarios


def run_cli(*argv):
    return cli.main(list(argv))


def run_cli_capture(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEval:
    def test_kl_value(self, capsys):
        code, out, _ = run_cli_capture(capsys, "eval", "--divergence", "kl",
                                       "--p", "0.5,0.5", "--q", "0.25,0.75")
        assert code == 0
        want = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert float(out.strip()) == pytest.approx(want, abs=1e-12)

    def test_bad_distribution(self, capsys):
        code, _, err = run_cli_capture(capsys, "eval", "--divergence", "kl",
                                       "--p", "0.5,0.6", "--q", "0.25,0.75")
        assert code == 1
        assert "error" in err

    def test_unknown_divergence(self, capsys):
        code, _, err = run_cli_capture(capsys, "eval", "--divergence", "nope",
                                       "--p", "0.5,0.5", "--q", "0.5,0.5")
        assert code == 1

    def test_kl_type_spec_document(self, capsys, tmp_path):
        doc = tmp_path / "spec.json"
        doc.write_text(json.dumps({"family": "kl_type", "h": "name:square"}))
        code, out, _ = run_cli_capture(capsys, "eval", "--divergence", str(doc),
                                       "--p", "0.3,0.7", "--q", "0.5,0.5")
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.5 * 0.2 ** 2, abs=1e-8)


class TestCheck:
    def test_dpi_pass_exit_zero(self, capsys, tmp_path):
        out_path = tmp_path / "rep.json"
        code, out, _ = run_cli_capture(
            capsys, "check", "dpi", "--divergence", "kl", "--n", "2",
            "--grid", "10", "--trials", "1000", "--seed", "42",
            "--out", str(out_path))
        assert code == 0
        assert "no_violation_found" in out
        doc = json.loads(out_path.read_text())
        assert doc["schema"] == "divergence-lab/1"
        assert doc["verdict"] == "no_violation_found"
        assert doc["config"]["seed"] == 42

    def test_dpi_violation_exit_three(self, capsys):
        code, out, _ = run_cli_capture(
            capsys, "check", "dpi", "--divergence", "euclidean", "--n", "3",
            "--trials", "20000", "--seed", "42")
        assert code == 3
        assert "violation" in out and "witness" in out

    def test_sufficiency(self, capsys):
        code, out, _ = run_cli_capture(
            capsys, "check", "sufficiency", "--divergence", "euclidean",
            "--n", "3", "--trials", "2000", "--seed", "42")
        assert code == 3

    def test_decomposable(self, capsys):
        code, out, _ = run_cli_capture(
            capsys, "check", "decomposable", "--divergence", "tv_squared",
            "--grid", "50")
        assert code == 0

    def test_shannon_requires_f(self, capsys):
        code, _, err = run_cli_capture(capsys, "check", "shannon", "--n", "3")
        assert code == 1

    def test_shannon_quadratic_violation(self, capsys):
        code, out, _ = run_cli_capture(
            capsys, "check", "shannon", "--f", "poly:0,-1,0.5", "--n", "3",
            "--trials", "30000", "--seed", "42")
        assert code == 3

    def test_shannon_clog_passes(self, capsys):
        code, out, _ = run_cli_capture(
            capsys, "check", "shannon", "--f", "clog:-1,0.2", "--n", "3",
            "--trials", "30000", "--seed", "42")
        assert code == 0


class TestGenerateAndFit:
    def test_generate_csv(self, capsys, tmp_path):
        out = tmp_path / "fam.csv"
        code, _, _ = run_cli_capture(capsys, "generate", "--h", "name:square",
                                     "--out", str(out), "--points", "64")
        assert code == 0
        rows = np.loadtxt(out, delimiter=",", skiprows=1)
        assert rows.shape == (64, 3)

    def test_generate_invalid_h_rejected(self, capsys, tmp_path):
        code, _, err = run_cli_capture(
            capsys, "generate", "--h", "name:decreasing",
            "--out", str(tmp_path / "x.csv"))
        assert code == 1

    def test_generate_invalid_h_with_override(self, capsys, tmp_path):
        code, _, _ = run_cli_capture(
            capsys, "generate", "--h", "name:decreasing", "--allow-invalid",
            "--out", str(tmp_path / "x.csv"))
        assert code == 0

    def test_fit_summary_output(self, capsys, tmp_path):
        csv_out = tmp_path / "fit.csv"
        sum_out = tmp_path / "fit.json"
        code, out, _ = run_cli_capture(
            capsys, "fit", "fdiv", "--divergence", "tv", "--pairs", "400",
            "--knots", "101", "--seed", "0", "--out", str(csv_out),
            "--summary-out", str(sum_out))
        assert code == 0
        doc = json.loads(sum_out.read_text())
        assert set(doc) >= {"residual", "passed", "threshold"}
        assert json.loads(out.strip())["residual"] == doc["residual"]


class TestConfig:
    def test_show_config(self, capsys):
        code, out, _ = run_cli_capture(capsys, "--show-config")
        assert code == 0
        doc = json.loads(out)
        assert doc["seed"] == 42
        assert doc["grid"] == 50

    def test_config_file_overrides_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7}))
        code, out, _ = run_cli_capture(capsys, "--config", str(cfg),
                                       "--show-config")
        assert json.loads(out)["seed"] == 7

    def test_flag_beats_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid": 5, "trials": 100}))
        out_path = tmp_path / "rep.json"
        code, _, _ = run_cli_capture(
            capsys, "--config", str(cfg), "check", "dpi", "--divergence", "kl",
            "--grid", "8", "--seed", "1", "--out", str(out_path))
        doc = json.loads(out_path.read_text())
        assert doc["config"]["grid"] == 8
        assert doc["config"]["random_trials"] == 100

    def test_usage_error_exit_one(self, capsys):
        # malformed usage exits with code 1, not argparse's default 2
        with pytest.raises(SystemExit) as exc:
            run_cli("check")
        assert exc.value.code == 1


class TestVerify:
    def test_unknown_scenario(self, capsys):
        code, _, err = run_cli_capture(capsys, "verify", "bogus", "--seed", "1")
        assert code == 1
        assert "unknown scenario" in err

    def test_list(self, capsys):
        code, out, _ = run_cli_capture(capsys, "verify", "all", "--list")
        assert code == 0
        for sid in scenarios.SCENARIOS:
            assert sid in out

    def test_single_scenario_report(self, capsys, tmp_path):
        out_path = tmp_path / "rep.json"
        code, out, _ = run_cli_capture(
            capsys, "verify", "q2-example-fidelity", "--seed", "42",
            "--format", "json", "--out", str(out_path))
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert doc["schema"] == "divergence-lab/1"
        assert doc["scenarios"][0]["id"] == "q2-example-fidelity"
        assert doc["scenarios"][0]["status"] == "pass"
        # runtime is deliberately not part of the JSON report
        assert "runtime" not in json.dumps(doc)

    def test_markdown_report(self, capsys, tmp_path):
        out_path = tmp_path / "rep.md"
        code, _, _ = run_cli_capture(
            capsys, "verify", "q2-example-fidelity", "--seed", "42",
            "--format", "markdown", "--out", str(out_path))
        text = out_path.read_text()
        assert "| scenario | status |" in text
        assert "q2-example-fidelity" in text


def test_console_entry_point_exists():
    proc = subprocess.run([sys.executable, "-m", "divergence_lab.cli",
                           "--show-config"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["seed"] == 42


class TestReportHelpers:
    def test_json_safe_handles_nonfinite(self):
        doc = scenarios._json_safe({"a": float("inf"), "b": float("nan"),
                                    "c": [1.0, float("-inf")]})
        assert doc == {"a": "inf", "b": "nan", "c": [1.0, "-inf"]}
        json.dumps(doc)

    def test_emit_report_roundtrip(self, tmp_path):
        r = scenarios.ScenarioResult("demo", "claim", "pass", {"x": 1.5}, 0.1)
        path = tmp_path / "r.json"
        scenarios.emit_report([r], path, fmt="json", seed=3)
        doc = json.loads(path.read_text())
        assert doc["seed"] == 3
        assert doc["all_pass"] is True
        assert doc["scenarios"][0]["details"] == {"x": 1.5}

    def test_emit_report_empty_list(self, tmp_path):
        path = tmp_path / "empty.json"
        scenarios.emit_report([], path, fmt="json", seed=1)
        doc = json.loads(path.read_text())
        assert doc["scenarios"] == []
        assert doc["all_pass"] is True

    def test_unknown_format(self, tmp_path):
        r = scenarios.ScenarioResult("demo", "claim", "pass", {}, 0.0)
        with pytest.raises(ValueError):
            scenarios.emit_report([r], tmp_path / "x", fmt="yaml")
