"""Unit tests for path simulation and the Monte-Carlo estimators."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from config import RunConfig
from errors import ConfigError, InvalidMixedActionError
from hjb import evaluate_discounted
from models import (
    Ball,
    EstimatorTag,
    GameSpec,
    Grid,
    LyapunovCertificate,
    MixingMode,
    SimConfig,
    StrategyField,
    ThetaGrid,
    WeightFunction,
    WeightKind,
)
from oracle import ChainGame, vi_discounted
from simulate import (
    CounterRNG,
    auto_horizon,
    mc_discounted,
    mc_discounted_chain,
    mc_ergodic,
    mc_ergodic_chain,
    mc_hitting_bound,
    mc_power_lyapunov,
    reflect,
    simulate_paths,
)


@pytest.fixture
def uniform_pair(small_grid):
    """Both players mix evenly over two actions."""
    return (
        StrategyField.uniform(small_grid.n_nodes, 2, player=1),
        StrategyField.uniform(small_grid.n_nodes, 2, player=2),
    )


@pytest.fixture
def two_state_chain():
    """A lazy two-state chain."""
    return sp.csr_matrix(np.array([[0.9, 0.1], [0.2, 0.8]]))


class TestRandomStreams:
    """Test the counter-based generator and reflection."""

    def test_draws_are_independent_of_batching(self):
        """Test a path sees the same words wherever its batch starts."""
        rng = CounterRNG(seed=7)

        whole = rng.raw(3, 0, 5)
        tail = rng.raw(3, 2, 3)

        np.testing.assert_array_equal(whole[2:], tail)

    def test_streams_and_steps_differ(self):
        """Test the stream key and the step index both change the draws."""
        base = CounterRNG(seed=7).raw(0, 0, 4)

        assert not np.array_equal(base, CounterRNG(seed=7, stream=1).raw(0, 0, 4))
        assert not np.array_equal(base, CounterRNG(seed=7).raw(1, 0, 4))

    def test_uniforms_in_unit_interval(self):
        """Test uniforms lie in [0, 1) and normals are finite."""
        normals, uniforms = CounterRNG(seed=1).draws(0, 0, 1000)

        assert normals.shape == (1000, 2)
        assert uniforms.min() >= 0.0 and uniforms.max() < 1.0
        assert np.all(np.isfinite(normals))

    def test_reflect(self):
        """Test mirror folding at both walls and across several periods."""
        folded = reflect(np.array([[2.3], [6.5], [-2.4], [1.0]]), (2.0,))

        np.testing.assert_allclose(folded[:, 0], [1.7, -1.5, -1.6, 1.0])


class TestPathSimulation:
    """Test the path generator."""

    def test_paths_stay_in_box_and_end_with_final_state(
        self, tanh_game, small_grid, uniform_pair
    ):
        """Test reflection keeps paths inside and the last state is terminal."""
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=200, seed=3)

        states = list(simulate_paths(tanh_game, small_grid, *uniform_pair, [2.0], simcfg))

        assert len(states) == 21
        assert states[-1].final and states[-1].time == pytest.approx(1.0)
        for state in states:
            assert np.all(np.abs(state.x) <= 2.5)

    def test_path_batches_are_reproducible(self, tanh_game, small_grid, uniform_pair):
        """Test a path ends in the same place when simulated in a later batch."""
        simcfg = SimConfig(dt=0.05, horizon=0.5, n_paths=100, seed=11)

        whole = list(
            simulate_paths(tanh_game, small_grid, *uniform_pair, [0.0], simcfg, n_paths=4)
        )[-1]
        part = list(
            simulate_paths(
                tanh_game,
                small_grid,
                *uniform_pair,
                [0.0],
                simcfg,
                first_path=2,
                n_paths=2,
            )
        )[-1]

        np.testing.assert_array_equal(whole.x[2:], part.x)

    def test_step_coarser_than_lattice_rejected(self, tanh_game, small_grid, uniform_pair):
        """Test dt above the grid spacing is a configuration error."""
        simcfg = SimConfig(dt=0.6, horizon=1.2, n_paths=100, seed=0)

        with pytest.raises(ConfigError):
            next(simulate_paths(tanh_game, small_grid, *uniform_pair, [0.0], simcfg))

    def test_driftless_increment_variance(self):
        """Test Var[X_T - X_0] = T a for zero drift far from the walls."""
        game = GameSpec.from_dict(
            {
                "dimension": 1,
                "actions": [1, 1],
                "diffusion": {"kind": "constant", "matrix": 0.8},
                "cost11": [{"kind": "constant", "value": [0.0]}],
            }
        )
        grid = Grid.regular(50.0, 0.5)
        pair = (
            StrategyField.uniform(grid.n_nodes, 1, player=1),
            StrategyField.uniform(grid.n_nodes, 1, player=2),
        )
        simcfg = SimConfig(dt=0.02, horizon=2.0, n_paths=4000, seed=13)

        final = list(simulate_paths(game, grid, *pair, [0.0], simcfg))[-1]
        increments = final.x[:, 0]
        expected = 2.0 * 0.8**2

        assert final.time == pytest.approx(2.0)
        assert abs(increments.mean()) <= 4.0 * math.sqrt(expected / 4000)
        assert increments.var(ddof=1) == pytest.approx(expected, rel=4.0 * math.sqrt(2.0 / 4000))


class TestEstimators:
    """Test the diffusion estimators on games with known answers."""

    def test_zero_cost_discounted_is_one(self, make_constant_cost_game, small_grid, uniform_pair):
        """Test the criterion is exactly one without costs."""
        game = make_constant_cost_game(0.0, 0.0)
        simcfg = SimConfig(dt=0.05, horizon=2.0, n_paths=100, seed=5)

        estimate = mc_discounted(
            game, small_grid, *uniform_pair, [0.0], 0.3, 1.0, 1, simcfg
        )

        assert estimate.estimate == 1.0
        assert estimate.stderr == 0.0
        assert estimate.horizon == pytest.approx(2.0)
        assert estimate.tag is EstimatorTag.DISCOUNTED

    def test_constant_cost_discounted(self, make_constant_cost_game, small_grid, uniform_pair):
        """Test exp(theta c (1 - exp(-alpha T)) / alpha) with an extended horizon."""
        theta, alpha, c = 0.2, 1.0, 0.5
        game = make_constant_cost_game(c, 0.1)
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=100, seed=5)

        estimate = mc_discounted(
            game, small_grid, *uniform_pair, [0.5], theta, alpha, 1, simcfg
        )

        horizon = estimate.horizon
        assert horizon >= auto_horizon(theta, alpha, c, simcfg.tail_tol)
        expected = math.exp(theta * c * (1.0 - math.exp(-alpha * horizon)) / alpha)
        assert estimate.estimate == pytest.approx(expected, rel=1e-12)
        assert estimate.upper == pytest.approx(math.exp(theta * c / alpha), rel=1e-12)
        assert estimate.extras["tail_bound"] <= simcfg.tail_tol * (1.0 + 1e-9)

    def test_constant_cost_ergodic(self, make_constant_cost_game, small_grid, uniform_pair):
        """Test the ergodic estimate recovers a constant cost at T and 2T."""
        game = make_constant_cost_game(0.7, 0.1)
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=100, seed=5)

        estimate = mc_ergodic(game, small_grid, *uniform_pair, [0.0], 0.4, 1, simcfg)

        assert estimate.estimate == pytest.approx(0.7, rel=1e-12)
        assert estimate.extras["estimate_2T"] == pytest.approx(0.7, rel=1e-12)
        assert "biased downward" in estimate.warnings[0]

    def test_same_seed_same_samples(self, tanh_game, small_grid, uniform_pair):
        """Test a fixed seed reproduces every sample and another seed does not."""
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=100, seed=9)
        other = SimConfig(dt=0.05, horizon=1.0, n_paths=100, seed=10)

        first = mc_discounted(tanh_game, small_grid, *uniform_pair, [0.0], 0.2, 1.0, 1, simcfg)
        again = mc_discounted(tanh_game, small_grid, *uniform_pair, [0.0], 0.2, 1.0, 1, simcfg)
        moved = mc_discounted(tanh_game, small_grid, *uniform_pair, [0.0], 0.2, 1.0, 1, other)

        np.testing.assert_array_equal(first.samples, again.samples)
        assert first.estimate == again.estimate
        assert not np.array_equal(first.samples, moved.samples)

    def test_average_mixing_is_deterministic_in_actions(
        self, make_constant_cost_game, small_grid, uniform_pair
    ):
        """Test averaged coefficients give the constant-cost answer too."""
        game = make_constant_cost_game(0.3, 0.3)
        simcfg = SimConfig(
            dt=0.05, horizon=1.0, n_paths=100, seed=2, mixing=MixingMode.AVERAGE
        )

        estimate = mc_ergodic(game, small_grid, *uniform_pair, [0.0], 0.5, 2, simcfg)

        assert estimate.estimate == pytest.approx(0.3, rel=1e-12)

    def test_ergodic_rejects_time_dependent_strategy(self, tanh_game, small_grid):
        """Test the ergodic estimator needs stationary strategies."""
        levels = StrategyField.uniform(small_grid.n_nodes, 2, player=1, n_levels=3)
        other = StrategyField.uniform(small_grid.n_nodes, 2, player=2)
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=100, seed=0)

        with pytest.raises(InvalidMixedActionError):
            mc_ergodic(tanh_game, small_grid, levels, other, [0.0], 0.2, 1, simcfg)

    def test_hitting_ball_must_lie_in_c0(self, games_dir):
        """Test a target ball around the origin is refused."""
        run = RunConfig.load(str(games_dir / "stable_tanh.toml"))
        grid = run.build_grid()
        pair = (
            StrategyField.uniform(grid.n_nodes, 2, player=1),
            StrategyField.uniform(grid.n_nodes, 2, player=2),
        )
        simcfg = SimConfig(dt=0.01, horizon=1.0, n_paths=100, seed=0)

        with pytest.raises(ConfigError):
            mc_hitting_bound(
                run.game, grid, *pair, [5.5], run.certificate, Ball((0.0,), 0.5), simcfg
            )

    def test_hitting_bound_holds_at_bundled_starts(self, games_dir):
        """Test E[exp(delta tau)] <= W(x) + 3 se from each start outside the ball."""
        run = RunConfig.load(str(games_dir / "stable_tanh.toml"))
        grid = run.build_grid()
        ball = run.build_ball()
        pair = (
            StrategyField.uniform(grid.n_nodes, 2, player=1),
            StrategyField.uniform(grid.n_nodes, 2, player=2),
        )
        simcfg = SimConfig(dt=0.01, horizon=2.0, n_paths=400, seed=run.simulation.seed)
        starts = run.start_points()

        assert len(starts) == 10
        for point in starts:
            assert not ball.contains(np.array(point))[0]
            estimate = mc_hitting_bound(
                run.game, grid, *pair, point, run.certificate, ball, simcfg
            )
            w = math.cosh(0.5 * point[0])

            assert estimate.extras["bound"] == pytest.approx(w)
            assert estimate.estimate <= w + 3.0 * estimate.stderr
            assert estimate.extras["holds"] is True
            assert estimate.extras["cap_fraction"] == 0.0
            assert estimate.warnings == []
            assert estimate.estimate > 1.0

    def test_power_lyapunov_constant_weight(
        self, make_constant_cost_game, small_grid, uniform_pair
    ):
        """Test a constant W with zero cost sits c T below the bound on every path."""
        game = make_constant_cost_game(0.0, 0.0)
        cert = LyapunovCertificate(
            weight=WeightFunction(WeightKind.CONSTANT, value=2.0),
            delta=0.5,
            c=0.5,
            region=Ball((0.0,), 1.0),
        )
        simcfg = SimConfig(dt=0.05, horizon=1.0, n_paths=50, seed=4)

        estimate = mc_power_lyapunov(
            game, small_grid, *uniform_pair, [0.0], 0.2, 1, cert, simcfg
        )

        assert estimate.tag is EstimatorTag.POWER_LYAPUNOV
        assert estimate.estimate == pytest.approx(2.0)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-15)
        assert estimate.extras["bound"] == pytest.approx(2.0 + 0.5 * estimate.horizon)
        assert estimate.extras["holds"] is True

    @pytest.mark.slow
    def test_discounted_brackets_pde_for_bump_cost(self, tanh_game):
        """Test the SDE estimate matches evaluate_discounted within max(2e-3, 3 se)."""
        grid = Grid.regular(2.5, 0.05)
        theta, alpha = 0.2, 1.0
        theta_grid = ThetaGrid.around(theta, 200)
        pair = (
            StrategyField.uniform(grid.n_nodes, 2, player=1),
            StrategyField.uniform(grid.n_nodes, 2, player=2),
        )
        node = int(grid.nearest_index([0.5])[0])
        pde = evaluate_discounted(tanh_game, grid, theta_grid, alpha, 1, *pair).values[200, node]
        simcfg = SimConfig(
            dt=0.01, horizon=0.0, n_paths=20000, seed=11, mixing=MixingMode.AVERAGE
        )

        estimate = mc_discounted(tanh_game, grid, *pair, [0.5], theta, alpha, 1, simcfg)

        assert pde > 1.0
        assert abs(estimate.estimate - pde) <= max(2e-3 * pde, 3.0 * estimate.stderr)
        assert estimate.stderr > 0.0


class TestChainEstimators:
    """Test the chain walkers against closed forms and value iteration."""

    def test_discounted_chain_constant_cost(self, two_state_chain):
        """Test the left-point sum with the terminal factor is reproduced."""
        theta, alpha, dt, kappa, c = 0.2, 1.0, 0.05, 0.002, 0.5
        cost = np.full(2, c)

        estimate = mc_discounted_chain(
            two_state_chain, cost, 0, theta, alpha, dt, kappa, c, 100, seed=1
        )

        n_steps = int(round(math.log(theta / kappa) / alpha / dt))
        exponent = kappa * c / alpha + theta * c * dt * math.fsum(
            math.exp(-alpha * n * dt) for n in range(n_steps)
        )
        assert estimate.estimate == pytest.approx(math.exp(exponent), rel=1e-12)
        assert estimate.horizon == pytest.approx(n_steps * dt)

    def test_discounted_chain_matches_value_iteration(self, two_state_chain):
        """Test the walker and the backward recursion agree on a constant cost."""
        transitions = two_state_chain.toarray()[None, None]
        chain = ChainGame(
            transitions, {1: np.full((1, 1, 2), 0.4), 2: np.zeros((1, 1, 2))}, dt=0.05
        )
        single = np.ones((2, 1))

        values = vi_discounted(chain, 0.3, 1.0, 1, single, single, kappa=0.003)
        estimate = mc_discounted_chain(
            two_state_chain, np.full(2, 0.4), 1, 0.3, 1.0, 0.05, 0.003, 0.4, 100, seed=4
        )

        assert estimate.estimate == pytest.approx(values[1], rel=1e-12)

    def test_ergodic_chain_constant_cost(self, two_state_chain):
        """Test the chain ergodic estimate recovers a constant cost."""
        estimate = mc_ergodic_chain(
            two_state_chain, np.full(2, 1.2), 0, 0.5, 0.1, 5.0, 100, seed=3
        )

        assert estimate.estimate == pytest.approx(1.2, rel=1e-12)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-15)

    def test_chain_walk_is_seeded(self, two_state_chain):
        """Test a cost that depends on the state gives reproducible samples."""
        cost = np.array([0.0, 1.0])

        first = mc_ergodic_chain(two_state_chain, cost, 0, 0.5, 0.1, 5.0, 200, seed=8)
        again = mc_ergodic_chain(two_state_chain, cost, 0, 0.5, 0.1, 5.0, 200, seed=8)

        np.testing.assert_array_equal(first.samples, again.samples)
        assert 0.0 < first.estimate < 1.0
