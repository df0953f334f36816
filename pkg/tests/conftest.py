"""Shared fixtures: small games and lattices that solve in well under a second."""

from pathlib import Path

import pytest

from models import GameSpec, Grid, ThetaGrid

GAMES_DIR = Path(__file__).resolve().parent.parent / "games"


def _tanh(slopes):
    return {"kind": "tanh_affine", "value": 0.0, "slope": slopes}


def _constant(values):
    return {"kind": "constant", "value": values}


@pytest.fixture
def games_dir():
    """Directory holding the bundled run files."""
    return GAMES_DIR


@pytest.fixture
def tanh_game_data():
    """Raw ``[game]`` table of a stable one-dimensional 2x2 game."""
    return {
        "name": "tanh_2x2",
        "dimension": 1,
        "actions": [2, 2],
        "diffusion": {"kind": "constant", "matrix": 1.0},
        "drift1": [_tanh([-1.0, -1.5])],
        "drift2": [_tanh([-1.0, -0.5])],
        "cost11": [
            {"kind": "gauss_bump", "weight": [0.4, 0.8], "center": [0.0], "width": 1.0}
        ],
        "cost12": [_constant([0.0, 0.2])],
        "cost21": [_constant([0.1, 0.0])],
        "cost22": [
            {"kind": "gauss_bump", "weight": [0.6, 0.3], "center": [0.5], "width": 1.0}
        ],
    }


@pytest.fixture
def tanh_game(tanh_game_data):
    """Stable one-dimensional 2x2 game with bump and constant costs."""
    return GameSpec.from_dict(tanh_game_data)


@pytest.fixture
def make_constant_cost_game():
    """Factory for games whose running costs do not depend on x or actions."""

    def build(c1: float, c2: float, actions=(2, 2)) -> GameSpec:
        m1, m2 = actions
        data = {
            "dimension": 1,
            "actions": [m1, m2],
            "diffusion": {"kind": "constant", "matrix": 1.0},
            "drift1": [_tanh([-1.0 - 0.5 * u for u in range(m1)])],
            "drift2": [_tanh([-0.5] * m2)],
            "cost11": [_constant([c1] * m1)],
            "cost22": [_constant([c2] * m2)],
        }
        return GameSpec.from_dict(data)

    return build


@pytest.fixture
def one_sided_game():
    """Player 2 has a single action, so fictitious play reduces to control."""
    return GameSpec.from_dict(
        {
            "dimension": 1,
            "actions": [2, 1],
            "diffusion": {"kind": "constant", "matrix": 1.0},
            "drift1": [_tanh([-1.0, -2.0])],
            "cost11": [
                {
                    "kind": "gauss_bump",
                    "weight": [0.2, 0.6],
                    "center": [0.0],
                    "width": 1.0,
                }
            ],
            "cost22": [_constant([0.1])],
        }
    )


@pytest.fixture
def small_grid():
    """Eleven nodes on [-2.5, 2.5]."""
    return Grid.regular(2.5, 0.5)


@pytest.fixture
def fine_grid():
    """Twenty-one nodes on [-2.5, 2.5]."""
    return Grid.regular(2.5, 0.25)


@pytest.fixture
def theta_grid():
    """Forty log-spaced levels up to theta = 0.5."""
    return ThetaGrid.from_cap(0.5, 40, kappa_ratio=1e-3)
