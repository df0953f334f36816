"""Unit tests for initial strategies, deviation families and enumeration."""

import numpy as np
import pytest

from errors import ConfigError
from policy.strategy_factory import (
    constant_pure,
    enumerate_pure_stationary,
    initial_pair,
    pure_deviations,
    sampled_pure,
)


class TestInitialPair:
    """Test the starting pairs for fictitious play."""

    def test_uniform_and_dirac(self):
        """Test uniform spreads mass and dirac plays action 0."""
        u1, u2 = initial_pair("uniform", 5, (2, 3))
        d1, d2 = initial_pair("dirac", 5, (2, 3))

        np.testing.assert_allclose(u2.weights, 1.0 / 3.0)
        assert (u1.player, u2.player) == (1, 2)
        np.testing.assert_array_equal(d1.weights[:, 0], 1.0)
        np.testing.assert_array_equal(d2.weights[:, 1:], 0.0)

    def test_random_is_seeded(self):
        """Test random pairs repeat for a seed and lie on the simplex."""
        first = initial_pair("random", 6, (3, 2), seed=5)
        again = initial_pair("random", 6, (3, 2), seed=5)
        other = initial_pair("random", 6, (3, 2), seed=6)

        np.testing.assert_array_equal(first[0].weights, again[0].weights)
        assert not np.array_equal(first[0].weights, other[0].weights)
        np.testing.assert_allclose(first[0].weights.sum(axis=1), 1.0)

    def test_unknown_kind(self):
        """Test an unknown kind names the solver.init key."""
        with pytest.raises(ConfigError) as excinfo:
            initial_pair("greedy", 4, (2, 2))

        assert excinfo.value.key == "solver.init"


class TestPureStrategies:
    """Test constant, sampled and enumerated pure strategies."""

    def test_constant_pure(self):
        """Test one constant strategy per action."""
        fields = constant_pure(4, 3, player=2)

        assert len(fields) == 3
        np.testing.assert_array_equal(fields[2].weights[:, 2], 1.0)

    def test_enumeration_order_and_cap(self):
        """Test selectors come in lexicographic order and the cap is enforced."""
        selectors = enumerate_pure_stationary(3, 2)

        assert selectors.shape == (8, 3)
        np.testing.assert_array_equal(selectors[0], [0, 0, 0])
        np.testing.assert_array_equal(selectors[1], [0, 0, 1])
        np.testing.assert_array_equal(selectors[-1], [1, 1, 1])
        with pytest.raises(ConfigError, match="exceed the cap"):
            enumerate_pure_stationary(13, 2)

    def test_sampled_pure_is_distinct_and_non_constant(self):
        """Test sampled selectors are unique and use more than one action."""
        fields = sampled_pure(20, 2, player=1, count=10, seed=3)

        keys = {field.weights.argmax(axis=1).tobytes() for field in fields}
        assert len(keys) == 10
        for field in fields:
            assert np.unique(field.weights.argmax(axis=1)).size > 1

    def test_small_families_are_enumerated(self):
        """Test few nodes give every non-constant selector."""
        fields = sampled_pure(2, 2, player=1, count=10)

        selectors = sorted(tuple(f.weights.argmax(axis=1)) for f in fields)
        assert selectors == [(0, 1), (1, 0)]

    def test_single_action_has_no_samples(self):
        """Test a player with one action has only the constant deviation."""
        assert sampled_pure(5, 1, player=2, count=4) == []
        deviations = pure_deviations(5, (2, 1), cap=3)
        assert [d.player for d in deviations].count(2) == 1
        assert [d.player for d in deviations].count(1) == 5
