"""Unit tests for the command-line interface."""

import json
import os
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from game_solver import cli


@pytest.fixture
def runner(tmp_path, monkeypatch):
    """CliRunner in an empty working directory with a clean environment."""
    monkeypatch.chdir(tmp_path)
    with patch.dict(os.environ, {"RSG_OUTPUT_PATH": str(tmp_path / "out")}, clear=True):
        yield CliRunner()


def _report(directory: Path) -> dict:
    return json.loads((directory / "report.json").read_text(encoding="utf-8"))


class TestCli:
    """Test subcommands, flags and exit codes."""

    def test_no_command_prints_usage(self, runner):
        """Test the bare group lists the common commands."""
        result = runner.invoke(cli, [])

        assert result.exit_code == 0
        assert "Risk-sensitive game solver" in result.output
        assert "nash-ergodic" in result.output

    def test_help_lists_pipeline_sections(self, runner):
        """Test --help groups commands into pipeline and validation."""
        result = runner.invoke(cli, ["--help"])

        assert result.exit_code == 0
        assert "Solver pipeline" in result.output
        assert "Validation" in result.output
        assert result.output.index("check") < result.output.index("crosscheck")

    def test_check_passes_on_stable_game(self, runner, games_dir, tmp_path):
        """Test the bundled certificate passes and a report is written."""
        out = tmp_path / "check"

        result = runner.invoke(cli, ["check", str(games_dir / "stable_tanh.toml"), "-o", str(out)])

        assert result.exit_code == 0, result.output
        report = _report(out)
        assert report["command"] == "check"
        assert [c["name"] for c in report["checks"]][:2] == ["ellipticity", "boundedness"]
        assert "timestamp" not in json.dumps(report)

    def test_check_fails_for_large_theta(self, runner, games_dir, tmp_path):
        """Test a theta beyond the small-cost condition exits with code 3."""
        result = runner.invoke(
            cli,
            [
                "check",
                str(games_dir / "stable_tanh.toml"),
                "--theta",
                "0.45",
                "-o",
                str(tmp_path / "big"),
            ],
        )

        assert result.exit_code == 3
        assert "small_cost" in result.output

    def test_solve_discounted_zero_cost(self, runner, games_dir, tmp_path):
        """Test zero costs give psi = 1 and the CSV fields are written."""
        out = tmp_path / "zero"

        result = runner.invoke(
            cli, ["solve-discounted", str(games_dir / "zero_cost.toml"), "-o", str(out)]
        )

        assert result.exit_code == 0, result.output
        report = _report(out)
        for entry in report["values"]:
            assert entry["psi_at_start"] == pytest.approx(1.0, abs=1e-12)
            assert entry["certainty_equivalent_at_start"] == pytest.approx(0.0, abs=1e-12)
            assert entry["step_halving"]["max_relative_change"] == pytest.approx(0.0, abs=1e-12)
            assert entry["step_halving"]["psi_extrapolated"] == pytest.approx(1.0, abs=1e-12)
        assert (out / "values_player1.csv").exists()
        assert (out / "strategies_player2.csv").exists()

    def test_solve_ergodic_zero_cost(self, runner, games_dir, tmp_path):
        """Test zero costs give rho = 0 for both players."""
        out = tmp_path / "ergodic"

        result = runner.invoke(
            cli,
            [
                "solve-ergodic",
                str(games_dir / "zero_cost.toml"),
                "--n-theta",
                "20",
                "-o",
                str(out),
            ],
        )

        assert result.exit_code == 0, result.output
        for entry in _report(out)["ergodic"]:
            assert entry["rho"] == pytest.approx(0.0, abs=1e-12)

    def test_nash_not_converged_exit_code(self, runner, games_dir, tmp_path):
        """Test an iteration cap of one on a contested game exits with code 4."""
        out = tmp_path / "nash"

        result = runner.invoke(
            cli,
            [
                "nash",
                str(games_dir / "small_chain.toml"),
                "--n-theta",
                "20",
                "--max-iter",
                "1",
                "--strat-tol",
                "1e-12",
                "-o",
                str(out),
            ],
        )

        assert result.exit_code == 4, result.output
        assert _report(out)["nash"]["converged"] is False

    def test_missing_run_file(self, runner):
        """Test a missing run file exits with code 2."""
        result = runner.invoke(cli, ["check", "nowhere.toml"])

        assert result.exit_code == 2
        assert "not found" in result.output

    def test_invalid_flag_value(self, runner, games_dir):
        """Test an out-of-range damping is a configuration error."""
        result = runner.invoke(
            cli, ["nash", str(games_dir / "zero_cost.toml"), "--damping", "2"]
        )

        assert result.exit_code == 2
        assert "solver.damping" in result.output

    def test_alphas_flag_reaches_run_config(self, runner, games_dir, tmp_path):
        """Test a comma-separated --alphas replaces the run file's list."""
        out = tmp_path / "alphas"

        result = runner.invoke(
            cli,
            ["check", str(games_dir / "stable_tanh.toml"), "--alphas", "0.3, 0.15", "-o", str(out)],
        )

        assert result.exit_code == 0, result.output
        assert _report(out)["config"]["solver"]["alphas"] == [0.3, 0.15]

    def test_malformed_alphas_flag(self, runner, games_dir):
        """Test a non-numeric --alphas entry is a configuration error."""
        result = runner.invoke(
            cli, ["check", str(games_dir / "stable_tanh.toml"), "--alphas", "0.3,abc"]
        )

        assert result.exit_code == 2
        assert "comma-separated" in result.output

    def test_unknown_key_in_run_file(self, runner, tmp_path):
        """Test misspelt keys are refused with code 2."""
        run_file = tmp_path / "bad.toml"
        run_file.write_text(
            "[game]\ndimension = 1\nactions = [1, 1]\n"
            'diffusion = { kind = "constant", matrix = 1.0 }\n'
            "[solver]\nalhpa = 1.0\n",
            encoding="utf-8",
        )

        result = runner.invoke(cli, ["check", str(run_file)])

        assert result.exit_code == 2
        assert "alhpa" in result.output

    def test_bad_environment(self, runner, games_dir):
        """Test an invalid thread count in the environment exits with code 2."""
        with patch.dict(os.environ, {"RSG_THREADS": "0"}):
            result = runner.invoke(cli, ["check", str(games_dir / "zero_cost.toml")])

        assert result.exit_code == 2
        assert "RSG_THREADS" in result.output
