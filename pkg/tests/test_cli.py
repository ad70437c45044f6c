import json

import pytest

from ccbsim.cli import main
from instances import feasible_expectation_config, knapsack_config


@pytest.fixture
def config_path(tmp_path):
    cfg = feasible_expectation_config([64, 128, 256], range(5), checks=True)
    path = tmp_path / "config.json"
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh)
    return path


class TestRunCommand:
    def test_writes_csv_and_summary(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_path), "--out", str(out),
                     "--horizon", "32", "--seed", "3"])
        assert code == 0
        csv_path = out / "rounds_T32_seed3.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 33  # header + 32 rounds
        summary = json.loads((out / "summary_T32_seed3.json").read_text())
        assert summary["horizon"] == 32
        assert "regret" in summary

    def test_zero_horizon(self, config_path, tmp_path):
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_path), "--out", str(out),
                     "--horizon", "0"])
        assert code == 0
        lines = (out / "rounds_T0_seed0.csv").read_text().splitlines()
        assert len(lines) == 1  # header only
        summary = json.loads((out / "summary_T0_seed0.json").read_text())
        assert summary["regret"] == 0.0
        assert summary["opt"] == 0.0

    def test_repeat_is_byte_identical(self, config_path, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            assert main(["run", "--config", str(config_path), "--out", str(out),
                         "--horizon", "64"]) == 0
        assert (out1 / "rounds_T64_seed0.csv").read_bytes() == \
               (out2 / "rounds_T64_seed0.csv").read_bytes()


class TestSweepCommand:
    def test_outputs_and_determinism(self, config_path, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["sweep", "--config", str(config_path), "--out", str(out1)]) == 0
        assert main(["sweep", "--config", str(config_path), "--out", str(out2),
                     "--threads", "2"]) == 0
        assert (out1 / "sweep_runs.csv").read_bytes() == (out2 / "sweep_runs.csv").read_bytes()
        assert (out1 / "sweep_summary.json").read_bytes() == \
               (out2 / "sweep_summary.json").read_bytes()
        summary = json.loads((out1 / "sweep_summary.json").read_text())
        assert len(summary["regret_mean"]) == 3


class TestCheckCommands:
    def test_lemma1(self, capsys):
        assert main(["check-lemma1", "--trials", "2000"]) == 0
        assert "min slack" in capsys.readouterr().out

    def test_surrogate(self, capsys):
        assert main(["check-surrogate", "--trials", "1000"]) == 0
        assert "min slack" in capsys.readouterr().out


class TestVerifyOracle:
    def test_reports_budget_and_error(self, config_path, capsys):
        assert main(["verify-oracle", "--config", str(config_path),
                     "--horizon", "500"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["error_budget"] > 0
        assert payload["realized_sqerr_f"] >= 0
        assert payload["aggregation_regret_f"] is not None


class TestSolveBenchmark:
    def test_prints_policy_and_certificate(self, tmp_path, capsys):
        cfg = knapsack_config([256], range(1))
        path = tmp_path / "knap.json"
        with open(path, "w") as fh:
            json.dump(cfg.to_dict(), fh)
        assert main(["solve-benchmark", "--config", str(path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["certificate"]["verified"] is True
        assert len(payload["per_context"]) == 2


class TestErrorPaths:
    def test_unknown_flag_exits_nonzero(self):
        assert main(["run", "--config", "x.json", "--bogus"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1

    def test_invalid_config_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert main(["run", "--config", str(path)]) == 1
