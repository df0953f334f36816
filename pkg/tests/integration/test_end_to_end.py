"""Integration tests for end-to-end pipeline functionality."""

import json
import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from click.testing import CliRunner

from config import Config, RunConfig
from discretize import prepare
from ergodic import evaluate_ergodic, solve_ergodic_br
from game_solver import GameSolver, cli
from oracle import best_response_exhaustive, build_chain, perron_ergodic
from policy.strategy_factory import initial_pair

pytestmark = pytest.mark.integration


@pytest.fixture
def small_chain_run(games_dir):
    """Bundled eleven-node chain game with a short theta lattice."""
    return RunConfig.load(
        str(games_dir / "small_chain.toml"), overrides={"grid.n_theta": 40}
    )


def _csv_bytes(directory: Path) -> dict:
    return {path.name: path.read_bytes() for path in sorted(directory.glob("*.csv"))}


class TestEndToEndPipeline:
    """Test complete pipelines on the bundled games."""

    def test_nash_runs_are_byte_identical(self, games_dir, tmp_path, monkeypatch):
        """Test two nash runs with one configuration write identical artifacts."""
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "nash"
        args = [
            "nash",
            str(games_dir / "small_chain.toml"),
            "--n-theta",
            "40",
            "--max-iter",
            "30",
            "-o",
            str(out),
        ]
        runner = CliRunner()

        with patch.dict(os.environ, {}, clear=True):
            first = runner.invoke(cli, args)
            first_csv = _csv_bytes(out)
            first_report = (out / "report.json").read_bytes()
            second = runner.invoke(cli, args)

        report = json.loads(first_report)
        expected = 0 if report["nash"]["converged"] else 4
        assert first.exit_code == expected, first.output
        assert report["deviation"]["holds"] or not report["nash"]["converged"]
        assert second.exit_code == first.exit_code
        assert set(first_csv) >= {
            "values_player1.csv",
            "values_player2.csv",
            "strategies_player1.csv",
            "strategies_player2.csv",
        }
        assert _csv_bytes(out) == first_csv
        assert (out / "report.json").read_bytes() == first_report

    def test_simulate_is_deterministic(self, games_dir, tmp_path, monkeypatch):
        """Test repeated simulations give bitwise-equal estimates."""
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "sim"
        args = [
            "simulate",
            str(games_dir / "small_chain.toml"),
            "--paths",
            "200",
            "--horizon",
            "1.0",
            "--dt",
            "0.01",
            "-o",
            str(out),
        ]
        runner = CliRunner()

        with patch.dict(os.environ, {}, clear=True):
            first = runner.invoke(cli, args)
            report = json.loads((out / "report.json").read_text(encoding="utf-8"))
            second = runner.invoke(cli, args)
            again = json.loads((out / "report.json").read_text(encoding="utf-8"))

        assert first.exit_code == 0, first.output
        assert second.exit_code == 0
        assert report["discounted"]["estimate"] == again["discounted"]["estimate"]
        assert report["ergodic"]["estimate"] == again["ergodic"]["estimate"]
        assert report["discounted"]["estimate"] >= 1.0

    def test_oracle_command(self, small_chain_run, tmp_path):
        """Test the oracle subcommand reports rho between the average and the sup."""
        small_chain_run.output.directory = str(tmp_path / "oracle")
        with patch.dict(os.environ, {}, clear=True):
            solver = GameSolver(Config(), small_chain_run)

        result = solver.oracle()

        assert result.success
        report = json.loads(Path(result.artifacts[-1]).read_text(encoding="utf-8"))
        for entry in report["players"]:
            assert entry["stationary_average_cost"] <= entry["rho"] + 1e-12
            assert entry["exhaustive_best_rho"] <= entry["rho"] * (1.0 + 1e-3)
            assert entry["discounted_at_start"] >= 1.0


class TestOracleAgreement:
    """Test the PDE solvers against exhaustive search on the chain."""

    def test_ergodic_best_response_matches_exhaustive_search(self, small_chain_run):
        """Test policy iteration finds the rho of the best pure selector."""
        grid = small_chain_run.build_grid()
        game = small_chain_run.game
        theta = small_chain_run.solver.theta
        disc = prepare(game, grid)
        chain = build_chain(game, grid, small_chain_run.simulation.dt, disc=disc)
        _, v2 = initial_pair("uniform", grid.n_nodes, game.n_actions)

        solution, strategy = solve_ergodic_br(game, grid, theta, 1, v2, anchor=5, disc=disc)
        selector, best = best_response_exhaustive(chain, theta, 1, v2, anchor=5)

        assert solution.rho == pytest.approx(best, rel=2e-3)
        chosen = np.eye(2)[selector]
        oracle_rho, _ = perron_ergodic(chain, theta, 1, chosen, v2.weights, anchor=5)
        assert oracle_rho == pytest.approx(best, rel=1e-10)
        replay = evaluate_ergodic(disc, theta, 1, strategy, v2, anchor=5)
        assert replay.rho == pytest.approx(solution.rho, rel=1e-9)


@pytest.mark.slow
class TestBundledEquilibrium:
    """Test fictitious play settles on the certified tanh game."""

    def test_stable_tanh_nash_converges(self, games_dir, tmp_path):
        """Test the bundled settings converge and no pure deviation gains over 5e-3."""
        run = RunConfig.load(str(games_dir / "stable_tanh.toml"))
        run.output.directory = str(tmp_path / "nash")
        with patch.dict(os.environ, {}, clear=True):
            solver = GameSolver(Config(), run)

        result = solver.nash()

        report = json.loads(Path(result.artifacts[-1]).read_text(encoding="utf-8"))
        assert report["nash"]["converged"], report["nash"]["residuals"]
        assert report["deviation"]["holds"]
        assert report["deviation"]["worst_violation"] <= 5e-3
        assert result.exit_code == 0, result.message
