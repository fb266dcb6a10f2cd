"""Tests for the gps_dwell_sim command-line entry point."""

from __future__ import annotations

import json
import os
from unittest.mock import patch

import pytest

from engine import SimTrace
from errors import InfeasibleStartError, NumericalBlowupError
from gps_dwell_sim import build_parser, main
from scenario import RunResult

MODULE = "gps_dwell_sim"


def _scenario(tmp_path, data: dict) -> str:
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return str(path)


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as exc_info:
        main(argv)
    return exc_info.value.code


# ── TestParser ────────────────


class TestParser:
    def test_run_defaults(self):
        args = build_parser().parse_args(["run", "scenario.json"])
        assert args.command == "run"
        assert args.config == "scenario.json"
        assert (args.seed, args.out, args.variant) == (None, None, None)

    def test_sweep_values(self):
        args = build_parser().parse_args(
            ["sweep", "s.json", "--param", "d_bar", "--values", "0.5,1.0,1.5", "--jobs", "2"]
        )
        assert args.values == [0.5, 1.0, 1.5]
        assert args.jobs == 2

    def test_verbosity_after_subcommand(self):
        args = build_parser().parse_args(["run", "s.json", "--verbose"])
        assert args.verbose and not args.quiet

    def test_verbose_and_quiet_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "s.json", "--verbose", "--quiet"])

    def test_unknown_sweep_parameter(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "s.json", "--param", "h", "--values", "0.1"])

    def test_bad_values(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "s.json", "--param", "N", "--values", "a,b"])


# ── TestMain ────────────────


class TestMain:
    def test_empty_run_succeeds(self, tmp_path, capsys):
        path = _scenario(tmp_path, {"engine": {"t_end": 0.0}})
        out = str(tmp_path / "out")
        assert _exit_code(["run", path, "--out", out, "--quiet"]) == 0
        assert os.path.exists(os.path.join(out, "trace.csv"))
        assert "GPS Dwell-Time Simulation Summary" in capsys.readouterr().out

    def test_seed_override_recorded(self, tmp_path):
        path = _scenario(tmp_path, {"engine": {"t_end": 0.0}})
        out = str(tmp_path / "out")
        _exit_code(["run", path, "--out", out, "--seed", "42", "--quiet"])
        with open(os.path.join(out, "config.json")) as f:
            assert json.load(f)["engine"]["seed"] == 42

    def test_missing_file(self, tmp_path, capsys):
        assert _exit_code(["run", str(tmp_path / "missing.json")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{bad json!!")
        assert _exit_code(["run", str(path)]) == 1
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        path = _scenario(tmp_path, {"model": {"dbar": 1.0}})
        assert _exit_code(["run", path]) == 1
        assert "model.dbar" in capsys.readouterr().err

    def test_validation_failure(self, tmp_path, capsys):
        path = _scenario(tmp_path, {"gains": {"k1": [0.5, 0.5]}})
        assert _exit_code(["run", path]) == 1
        assert "lambda_min(k1) must exceed L_f" in capsys.readouterr().err

    def test_ceiling_violation(self, tmp_path, capsys):
        path = _scenario(tmp_path, {"scheduler": {"V_u": 5.0}})
        assert _exit_code(["run", path]) == 1
        assert "V_u < eta^2/2 is violated" in capsys.readouterr().err

    @pytest.mark.parametrize("error", [
        NumericalBlowupError("non-finite state after step", 1.234),
        InfeasibleStartError("V=5 already exceeds V_u=4 at a GPS-denied start"),
    ])
    def test_numerical_failure(self, tmp_path, capsys, error):
        path = _scenario(tmp_path, {})
        with patch(f"{MODULE}.run_scenario", side_effect=error):
            assert _exit_code(["run", path]) == 2
        assert "simulation failed" in capsys.readouterr().err

    def test_safety_trip(self, tmp_path, capsys):
        path = _scenario(tmp_path, {})
        tripped = RunResult(SimTrace(n=2, p=2, V_u=4.0, max_V=6.0), {}, None)
        with patch(f"{MODULE}.run_scenario", return_value=tripped), \
                patch(f"{MODULE}.print_run_report"):
            assert _exit_code(["run", path]) == 3
        assert "safety monitor tripped" in capsys.readouterr().err

    @pytest.mark.slow
    def test_stretched_denial_exits_3(self, tmp_path, capsys):
        path = _scenario(tmp_path, {
            "estimator": {"lambda_bar": 10.0},
            "scheduler": {"denied_scale": 30.0},
            "engine": {"t_end": 6.5},
        })
        out = str(tmp_path / "out")
        assert _exit_code(["run", path, "--out", out, "--quiet"]) == 3
        with open(os.path.join(out, "summary.json")) as f:
            summary = json.load(f)
        assert summary["safety_ok"] is False
        assert summary["max_V"] > 4.0

    def test_fractional_capacity_sweep_is_config_error(self, tmp_path, capsys):
        path = _scenario(tmp_path, {})
        code = _exit_code(["sweep", path, "--param", "N", "--values", "20.5", "--out", str(tmp_path)])
        assert code == 1
        assert "sweep.N" in capsys.readouterr().err

    def test_sweep_exit_is_worst_status(self, tmp_path, capsys):
        path = _scenario(tmp_path, {})
        rows = [
            {"value": 0.5, "status": 0, "max_denied_budget": 0.1, "max_V": 1.0},
            {"value": 1.0, "status": 3, "max_denied_budget": 0.2, "max_V": 4.5},
        ]
        with patch(f"{MODULE}.run_sweep", return_value=rows) as mocked:
            assert _exit_code(["sweep", path, "--param", "d_bar", "--values", "0.5,1.0"]) == 3
        assert mocked.call_args.args[1:3] == ("d_bar", [0.5, 1.0])
        assert "d_bar=1.0: status 3" in capsys.readouterr().out
