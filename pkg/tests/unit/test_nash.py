"""Unit tests for discounted fictitious play."""

import numpy as np
import pytest

from discretize import prepare
from hjb import solve_discounted
from models import GameSpec, Schedule, StrategyField, ThetaGrid
from nash import (
    best_response,
    coupled_residuals,
    deviation_test,
    fixed_point_consistency,
    nash_iterate,
)
from policy.strategy_factory import initial_pair, pure_deviations


@pytest.fixture
def short_theta_grid():
    """Twenty levels up to theta = 0.4."""
    return ThetaGrid.from_cap(0.4, 20)


class TestNashIterate:
    """Test the damped fictitious-play loop."""

    def test_action_independent_costs_converge_immediately(
        self, make_constant_cost_game, small_grid, short_theta_grid
    ):
        """Test a game where every action ties stops after one iteration."""
        game = make_constant_cost_game(0.5, 0.2)
        init = initial_pair("uniform", small_grid.n_nodes, game.n_actions)

        report = nash_iterate(game, small_grid, short_theta_grid, 1.0, init)

        assert report.converged
        assert report.iterations == 1
        assert report.change == 0.0
        assert max(report.residuals) < 1e-8
        np.testing.assert_allclose(report.strategies[0].weights, 0.5)

    def test_one_sided_game_converges_geometrically(
        self, one_sided_game, small_grid, short_theta_grid
    ):
        """Test constant damping halves the distance to a fixed best response."""
        init = initial_pair("uniform", small_grid.n_nodes, one_sided_game.n_actions)

        report = nash_iterate(
            one_sided_game, small_grid, short_theta_grid, 1.0, init, damping=0.5
        )

        assert report.converged
        assert report.iterations <= 20
        changes = [entry["change"] for entry in report.history]
        assert all(b <= a + 1e-15 for a, b in zip(changes, changes[1:]))
        assert report.to_dict()["iterations"] == report.iterations

    def test_non_convergence_is_reported(self, tanh_game, small_grid, short_theta_grid):
        """Test hitting the iteration cap returns a report instead of raising."""
        init = initial_pair("dirac", small_grid.n_nodes, tanh_game.n_actions)

        report = nash_iterate(
            tanh_game,
            small_grid,
            short_theta_grid,
            1.0,
            init,
            Schedule.HARMONIC,
            max_iter=1,
            strat_tol=1e-12,
        )

        assert not report.converged
        assert report.iterations == 1
        assert report.history[0]["beta"] == 1.0

    def test_threads_do_not_change_the_result(self, one_sided_game, small_grid, short_theta_grid):
        """Test the two best responses may run concurrently."""
        init = initial_pair("uniform", small_grid.n_nodes, one_sided_game.n_actions)

        serial = nash_iterate(one_sided_game, small_grid, short_theta_grid, 1.0, init)
        threaded = nash_iterate(
            one_sided_game, small_grid, short_theta_grid, 1.0, init, threads=2
        )

        np.testing.assert_array_equal(
            serial.strategies[0].weights, threaded.strategies[0].weights
        )
        assert serial.iterations == threaded.iterations


class TestEquilibriumChecks:
    """Test residuals, deviations and fixed-point consistency."""

    def test_residuals_vanish_at_best_responses(self, tanh_game, small_grid, short_theta_grid):
        """Test the coupled defect is zero when both play pure best responses."""
        disc = prepare(tanh_game, small_grid)
        v1, v2 = initial_pair("uniform", small_grid.n_nodes, tanh_game.n_actions)
        br1 = best_response(tanh_game, small_grid, short_theta_grid, 1.0, 1, v2, disc=disc)
        value1, _ = solve_discounted(
            tanh_game, small_grid, short_theta_grid, 1.0, 1, v2, disc=disc
        )
        value2, br2 = solve_discounted(
            tanh_game, small_grid, short_theta_grid, 1.0, 2, br1, disc=disc
        )

        residuals = coupled_residuals(
            disc, short_theta_grid, 1.0, (br1, br2), (value1, value2)
        )

        assert residuals[1] < 1e-8

    def test_deviation_test_at_tied_equilibrium(
        self, make_constant_cost_game, small_grid, short_theta_grid
    ):
        """Test no pure deviation gains when costs ignore actions."""
        game = make_constant_cost_game(0.5, 0.2)
        pair = initial_pair("uniform", small_grid.n_nodes, game.n_actions)
        deviations = pure_deviations(small_grid.n_nodes, game.n_actions, cap=4)

        report = deviation_test(game, small_grid, short_theta_grid, 1.0, pair, deviations)

        assert report.holds
        assert report.worst_violation < 1e-9
        assert report.n_deviations == len(deviations) == 12

    def test_deviation_test_detects_gain(self, one_sided_game, small_grid, short_theta_grid):
        """Test a bad pair loses to a constant pure deviation."""
        m2 = one_sided_game.n_actions[1]
        worst = StrategyField.dirac(np.ones(small_grid.n_nodes, dtype=int), 2, player=1)
        other = StrategyField.uniform(small_grid.n_nodes, m2, player=2)
        better = StrategyField.dirac(np.zeros(small_grid.n_nodes, dtype=int), 2, player=1)

        report = deviation_test(
            one_sided_game, small_grid, short_theta_grid, 1.0, (worst, other), [better]
        )

        assert report.per_player[0] > 0
        assert report.worst_case == "player 1 deviation #0"

    def test_fixed_point_consistency(self, make_constant_cost_game, small_grid, short_theta_grid):
        """Test a converged tied equilibrium is a fixed point of the best response."""
        game = make_constant_cost_game(0.5, 0.2)
        init = initial_pair("uniform", small_grid.n_nodes, game.n_actions)
        disc = prepare(game, small_grid)
        report = nash_iterate(game, small_grid, short_theta_grid, 1.0, init, disc=disc)

        assert fixed_point_consistency(report, short_theta_grid, 1.0, disc) == 0.0


def _bump(weights, center=0.0):
    return {"kind": "gauss_bump", "weight": weights, "center": [center], "width": 1.0}


@pytest.fixture
def decoupled_game():
    """Player 2 neither moves the state nor touches player 1's cost."""
    return GameSpec.from_dict(
        {
            "dimension": 1,
            "actions": [2, 2],
            "diffusion": {"kind": "constant", "matrix": 1.0},
            "drift1": [{"kind": "tanh_affine", "value": 0.0, "slope": [-1.0, -2.0]}],
            "cost11": [_bump([0.6, 0.2])],
            "cost22": [{"kind": "constant", "value": [0.5, 0.2]}],
        }
    )


@pytest.fixture
def symmetric_game():
    """Swapping the players maps the game onto itself."""
    slopes = {"kind": "tanh_affine", "value": 0.0, "slope": [-1.0, -1.5]}
    cross = {"kind": "constant", "value": [0.0, 0.2]}
    return GameSpec.from_dict(
        {
            "dimension": 1,
            "actions": [2, 2],
            "diffusion": {"kind": "constant", "matrix": 1.0},
            "drift1": [slopes],
            "drift2": [dict(slopes)],
            "cost11": [_bump([0.4, 0.8])],
            "cost12": [cross],
            "cost21": [dict(cross)],
            "cost22": [_bump([0.4, 0.8])],
        }
    )


class TestStructuredGames:
    """Test decoupled and swap-symmetric games."""

    def test_decoupled_game_reaches_single_agent_optima(
        self, decoupled_game, small_grid, short_theta_grid
    ):
        """Test undamped play stops within two iterations at each player's own optimum."""
        n = small_grid.n_nodes
        init = initial_pair("uniform", n, decoupled_game.n_actions)

        report = nash_iterate(
            decoupled_game, small_grid, short_theta_grid, 1.0, init, damping=1.0
        )
        alone1, _ = solve_discounted(
            decoupled_game,
            small_grid,
            short_theta_grid,
            1.0,
            1,
            StrategyField.dirac(np.zeros(n, dtype=int), 2, player=2),
        )
        alone2, _ = solve_discounted(
            decoupled_game, small_grid, short_theta_grid, 1.0, 2, report.strategies[0]
        )

        assert report.converged
        assert report.iterations <= 2
        np.testing.assert_allclose(report.values[0].values, alone1.values, rtol=1e-10)
        np.testing.assert_allclose(report.values[1].values, alone2.values, rtol=1e-10)
        np.testing.assert_array_equal(report.strategies[1].weights[..., 1], 1.0)

    @pytest.mark.parametrize("max_iter", [1, 2, 3])
    def test_symmetric_game_keeps_iterates_symmetric(
        self, symmetric_game, small_grid, short_theta_grid, max_iter
    ):
        """Test a symmetric start stays swap-symmetric through damped play."""
        init = initial_pair("uniform", small_grid.n_nodes, symmetric_game.n_actions)

        report = nash_iterate(
            symmetric_game,
            small_grid,
            short_theta_grid,
            1.0,
            init,
            max_iter=max_iter,
            strat_tol=1e-12,
        )

        v1, v2 = report.strategies
        np.testing.assert_allclose(v1.weights, v2.weights, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(
            report.values[0].values, report.values[1].values, rtol=1e-10
        )
