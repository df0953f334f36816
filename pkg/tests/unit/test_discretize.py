"""Unit tests for the upwind generator and chain extraction."""

import numpy as np
import pytest
import scipy.sparse as sp

from discretize import (
    GeneratorBank,
    build_generator,
    check_monotone,
    extract_chain,
    is_monotone,
    mixed_generator_apply,
    prepare,
)
from errors import MonotonicityError, StabilityBoundError
from models import GameSpec, Grid, StrategyField


class TestGenerators:
    """Test generator structure."""

    def test_every_pure_pair_is_monotone(self, tanh_game, small_grid):
        """Test non-negative off-diagonals and zero row sums for all pairs."""
        disc = prepare(tanh_game, small_grid)

        for u1 in range(2):
            for u2 in range(2):
                gen = disc.bank.pair(u1, u2)
                assert gen.n_nodes == small_grid.n_nodes
                assert is_monotone(gen.matrix)
                np.testing.assert_allclose(gen.apply(np.ones(11)), 0.0, atol=1e-12)

    def test_check_monotone_rejects_flipped_bank(self, tanh_game, small_grid):
        """Test a bank with negated coefficients fails the monotonicity check."""
        bank = prepare(tanh_game, small_grid).bank
        flipped = GeneratorBank(bank.grid, bank.rows, bank.cols, -bank.data)

        check_monotone(bank)
        with pytest.raises(MonotonicityError, match=r"action pair \(0, 0\)"):
            check_monotone(flipped)

    def test_bank_matches_single_pair_builder(self, tanh_game, small_grid):
        """Test the shared-pattern bank agrees with the one-pair builder."""
        disc = prepare(tanh_game, small_grid, threads=2)
        single = build_generator(tanh_game, small_grid, 1, 0)

        diff = disc.bank.pair(1, 0).matrix - single.matrix
        assert abs(diff).max() == pytest.approx(0.0, abs=1e-12)

    def test_reflecting_boundary(self, tanh_game, small_grid):
        """Test the ghost node folds onto the first interior neighbour."""
        gen = build_generator(tanh_game, small_grid, 0, 0).matrix.toarray()

        assert np.count_nonzero(gen[0]) == 2
        assert gen[0, 1] > 0
        assert gen[-1, -2] > 0

    def test_comparison_principle(self, tanh_game, small_grid):
        """Test (Q psi)_i <= (Q phi)_i when psi <= phi with equality at i."""
        gen = prepare(tanh_game, small_grid).bank.pair(0, 1)
        rng = np.random.default_rng(3)
        for _ in range(20):
            phi = rng.uniform(1.0, 2.0, size=11)
            psi = phi - rng.uniform(0.0, 0.5, size=11)
            i = int(rng.integers(0, 11))
            psi[i] = phi[i]
            assert gen.apply(psi)[i] <= gen.apply(phi)[i] + 1e-12

    def test_mixed_apply_matches_assembled_matrix(self, tanh_game, small_grid):
        """Test the pair-by-pair mixture equals the assembled mixed generator."""
        disc = prepare(tanh_game, small_grid)
        rng = np.random.default_rng(0)
        w1 = rng.dirichlet(np.ones(2), size=11)
        w2 = rng.dirichlet(np.ones(2), size=11)
        psi = rng.uniform(1.0, 3.0, size=11)

        direct = mixed_generator_apply(
            disc.bank, StrategyField(w1, 1), StrategyField(w2, 2), psi
        )

        np.testing.assert_allclose(direct, disc.bank.mixed(w1, w2) @ psi, atol=1e-12)

    def test_cross_diffusion_in_two_dimensions_rejected(self):
        """Test a non-diagonal covariance in 2-D has no monotone stencil."""
        game = GameSpec.from_dict(
            {
                "dimension": 2,
                "actions": [1, 1],
                "diffusion": {"kind": "constant", "matrix": [[1.0, 0.5], [0.0, 1.0]]},
            }
        )

        with pytest.raises(MonotonicityError):
            prepare(game, Grid.regular(2.0, 0.4, dimension=2))

    def test_own_costs_against_mixed_opponent(self, tanh_game, small_grid):
        """Test per-action costs include the opponent's averaged part."""
        disc = prepare(tanh_game, small_grid)
        other = np.full((11, 2), 0.5)

        costs = disc.own_costs(1, other)

        np.testing.assert_allclose(costs, disc.tables.cost(1, 1) + 0.1)


class TestChainExtraction:
    """Test P = I + dt Q."""

    def test_stochastic_within_bound(self, tanh_game, small_grid):
        """Test the chain is row-stochastic and non-negative."""
        gen = prepare(tanh_game, small_grid).bank.pair(1, 1)
        dt = 0.5 / gen.max_rate

        transition = extract_chain(gen, dt)

        assert sp.issparse(transition)
        assert transition.toarray().min() >= 0.0
        np.testing.assert_allclose(transition.sum(axis=1), 1.0, atol=1e-12)

    def test_stability_bound(self, tanh_game, small_grid):
        """Test steps beyond 1 / max|Q_ii| are refused."""
        gen = prepare(tanh_game, small_grid).bank.pair(0, 0)

        with pytest.raises(StabilityBoundError) as excinfo:
            extract_chain(gen, 2.0 / gen.max_rate)

        assert excinfo.value.bound == pytest.approx(1.0 / gen.max_rate)
