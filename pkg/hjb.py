"""kappa-truncated discounted HJB equation marched in s = log(theta).

Each level solves implicitly
    (alpha / ds) (psi_{j+1} - psi_j) = min_u [Q_u psi_{j+1} + g_u psi_{j+1}]
with the exponentially fitted reaction
    g = (alpha / ds) (1 - exp(-(theta_{j+1} - theta_j) r / alpha)),
which tends to theta r as ds -> 0, is exact for constant costs and keeps the
level matrix an M-matrix for every step size.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from discretize import Discretization, prepare
from errors import ConfigError, InvariantBreachError, PolicyIterationError
from models import CheckReport, GameSpec, Grid, StrategyField, ThetaGrid, ValueField

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-8
MONOTONE_SLACK = 1e-10
MAX_HOWARD_ITERATIONS = 50
TIE_TOL = 1e-11
# Incumbent excess over the pointwise minimum, relative to psi, below which
# fictitious play keeps the incumbent. Above the level-solve error, well below
# the coupled residual tolerance.
LAZY_TOL = 1e-5


def fitted_reaction(
    cost: np.ndarray, theta_lo: float, theta_hi: float, alpha: float, ds: float
) -> np.ndarray:
    """Per-step reaction coefficient replacing theta * r."""
    return (alpha / ds) * -np.expm1(-(theta_hi - theta_lo) * cost / alpha)


def select_actions(
    F: np.ndarray, scale: np.ndarray, incumbent: Optional[np.ndarray] = None
) -> np.ndarray:
    """Per-node argmin of F (m, n) with ties broken by lowest index.

    Values within TIE_TOL * scale of the minimum tie; a tied incumbent
    action is kept.
    """
    best = F.min(axis=0)
    tied = F <= best + TIE_TOL * scale
    choice = np.argmax(tied, axis=0)
    if incumbent is not None:
        keep = tied[incumbent, np.arange(F.shape[1])]
        choice = np.where(keep, incumbent, choice)
    return choice


def tie_scale(gens: Sequence[sp.csr_matrix], reaction: np.ndarray, psi: np.ndarray):
    rates = np.max([np.abs(g.diagonal()) for g in gens], axis=0)
    return np.abs(psi) * (1.0 + rates + np.max(np.abs(reaction), axis=0))


def selected_generator(
    gens: Sequence[sp.csr_matrix], selector: np.ndarray
) -> sp.csr_matrix:
    """Rows of each action generator where the selector picks that action."""
    total = None
    for u, gen in enumerate(gens):
        mask = (selector == u).astype(float)
        if not mask.any():
            continue
        part = sp.diags(mask) @ gen
        total = part if total is None else total + part
    return total.tocsr()


def hamiltonian(gens, reaction, psi) -> np.ndarray:
    return np.stack([gen @ psi + reaction[u] * psi for u, gen in enumerate(gens)])


def _optimize_level(
    gens: Sequence[sp.csr_matrix],
    reaction: np.ndarray,
    psi_prev: np.ndarray,
    rate: float,
    selector: np.ndarray,
    level: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Howard iteration for one implicit level; returns psi, selector, F."""
    n = psi_prev.size
    identity = sp.identity(n, format="csr")
    rhs = rate * psi_prev
    nodes = np.arange(n)
    for iteration in range(1, MAX_HOWARD_ITERATIONS + 1):
        system = (
            rate * identity
            - selected_generator(gens, selector)
            - sp.diags(reaction[selector, nodes])
        )
        psi = spsolve(system.tocsc(), rhs)
        F = hamiltonian(gens, reaction, psi)
        improved = select_actions(F, tie_scale(gens, reaction, psi), selector)
        if np.array_equal(improved, selector):
            logger.debug("level %d settled after %d policy iterations", level, iteration)
            return psi, selector, F
        changed = int(np.flatnonzero(improved != selector)[0])
        selector = improved
    raise PolicyIterationError(changed, level, MAX_HOWARD_ITERATIONS)


def _check_bounds(psi: np.ndarray, theta: float, r_sup: float, alpha: float, level: int):
    upper = np.exp(theta * r_sup / alpha) * (1.0 + BOUND_SLACK)
    if psi.min() < 1.0 - BOUND_SLACK or psi.max() > upper:
        raise InvariantBreachError(
            f"psi left [1, {upper:.6g}] at theta level {level} "
            f"(range [{psi.min():.6g}, {psi.max():.6g}]); refine the theta step"
        )


def lazy_keep(
    strategy: np.ndarray,
    incumbent: np.ndarray,
    F: np.ndarray,
    psi: np.ndarray,
    tol: float = LAZY_TOL,
) -> np.ndarray:
    """Keep incumbent mixed actions whose Hamiltonian is within tol * psi of the minimum."""
    incumbent_value = np.einsum("nu,un->n", incumbent, F)
    attains = incumbent_value - F.min(axis=0) <= tol * np.abs(psi)
    return np.where(attains[:, None], incumbent, strategy)


def solve_discounted(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    player: int,
    opponent: StrategyField,
    *,
    disc: Optional[Discretization] = None,
    incumbent: Optional[StrategyField] = None,
) -> Tuple[ValueField, StrategyField]:
    """Optimal value and minimizing selector of ``player`` against ``opponent``.

    Args:
        spec: Game definition
        grid: Spatial lattice
        theta_grid: Logarithmic theta lattice
        alpha: Discount rate
        player: Acting player (1 or 2)
        opponent: Fixed strategy of the other player
        disc: Prebuilt discretization of ``spec`` on ``grid``
        incumbent: Own mixed strategy kept wherever it already attains the
            minimum (used by fictitious play)

    Returns:
        Tuple of the value field and the (eventually stationary) selector
    """
    disc = disc or prepare(spec, grid)
    n = grid.n_nodes
    m = spec.n_actions[player - 1]
    thetas = theta_grid.nodes
    ds = theta_grid.log_step
    rate = alpha / ds
    r_sup = disc.cost_sup[player - 1]

    values = np.empty((theta_grid.n_levels, n))
    weights = np.empty((theta_grid.n_levels, n, m))
    values[0] = np.exp(thetas[0] * r_sup / alpha)

    other = opponent.at_level(0)
    gens = disc.own_generators(player, other)
    costs = disc.own_costs(player, other)
    F0 = hamiltonian(gens, thetas[0] * costs, values[0])
    selector = select_actions(F0, tie_scale(gens, thetas[0] * costs, values[0]))
    weights[0] = np.eye(m)[selector]
    if incumbent is not None:
        weights[0] = lazy_keep(weights[0], incumbent.at_level(0), F0, values[0])

    for j in range(theta_grid.n_steps):
        other = opponent.at_level(j + 1)
        if not opponent.stationary:
            gens = disc.own_generators(player, other)
            costs = disc.own_costs(player, other)
        reaction = fitted_reaction(costs, thetas[j], thetas[j + 1], alpha, ds)
        psi, selector, F = _optimize_level(
            gens, reaction, values[j], rate, selector, j + 1
        )
        _check_bounds(psi, thetas[j + 1], r_sup, alpha, j + 1)
        values[j + 1] = psi
        weights[j + 1] = np.eye(m)[selector]
        if incumbent is not None:
            weights[j + 1] = lazy_keep(
                weights[j + 1], incumbent.at_level(j + 1), F, psi
            )

    logger.info(
        "player %d discounted solve: %d levels, psi in [%.6g, %.6g]",
        player,
        theta_grid.n_levels,
        values.min(),
        values.max(),
    )
    field = ValueField(values, player, alpha, theta_grid, grid)
    return field, StrategyField(weights, player)


def evaluate_discounted(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    player: int,
    v1: StrategyField,
    v2: StrategyField,
    *,
    disc: Optional[Discretization] = None,
) -> ValueField:
    """Criterion of ``player`` for the fixed pair (v1, v2)."""
    disc = disc or prepare(spec, grid)
    n = grid.n_nodes
    thetas = theta_grid.nodes
    ds = theta_grid.log_step
    rate = alpha / ds
    r_sup = disc.cost_sup[player - 1]
    identity = sp.identity(n, format="csr")

    values = np.empty((theta_grid.n_levels, n))
    values[0] = np.exp(thetas[0] * r_sup / alpha)
    fixed = v1.stationary and v2.stationary
    generator = cost = None
    for j in range(theta_grid.n_steps):
        if generator is None or not fixed:
            w1, w2 = v1.at_level(j + 1), v2.at_level(j + 1)
            generator = disc.bank.mixed(w1, w2)
            cost = disc.tables.mixed_cost(player, w1, w2)
        reaction = fitted_reaction(cost, thetas[j], thetas[j + 1], alpha, ds)
        system = rate * identity - generator - sp.diags(reaction)
        values[j + 1] = spsolve(system.tocsc(), rate * values[j])
        _check_bounds(values[j + 1], thetas[j + 1], r_sup, alpha, j + 1)
    return ValueField(values, player, alpha, theta_grid, grid)


def minimizing_selector(
    spec: GameSpec,
    grid: Grid,
    psi_level: np.ndarray,
    theta: float,
    player: int,
    opponent_level: np.ndarray,
    *,
    disc: Optional[Discretization] = None,
) -> StrategyField:
    """Dirac selector minimizing Q_u psi + theta r_u psi node by node."""
    disc = disc or prepare(spec, grid)
    psi_level = np.asarray(psi_level, dtype=float)
    gens = disc.own_generators(player, opponent_level)
    reaction = theta * disc.own_costs(player, opponent_level)
    F = hamiltonian(gens, reaction, psi_level)
    choice = select_actions(F, tie_scale(gens, reaction, psi_level))
    return StrategyField.dirac(choice, spec.n_actions[player - 1], player)


def richardson_extrapolate(coarse: ValueField, fine: ValueField) -> ValueField:
    """First-order extrapolation 2 psi_fine - psi_coarse on the coarse levels."""
    if fine.theta_grid != coarse.theta_grid.refined():
        raise ConfigError("fine field must use the theta grid refined once")
    values = 2.0 * fine.values[::2] - coarse.values
    return ValueField(values, coarse.player, coarse.alpha, coarse.theta_grid, coarse.grid)


def step_halving_report(
    coarse: ValueField, fine: ValueField, level: int, node: int
) -> Dict[str, float]:
    """Coarse-to-fine change on the coarse levels and the extrapolated psi at one cell."""
    extrapolated = richardson_extrapolate(coarse, fine)
    change = np.abs(fine.values[::2] - coarse.values) / coarse.values
    report = {
        "max_relative_change": float(change.max()),
        "psi_fine": float(fine.values[2 * level, node]),
        "psi_extrapolated": float(extrapolated.values[level, node]),
    }
    logger.info(
        "player %d step halving: max change %.3e, extrapolated psi %.10g",
        coarse.player,
        report["max_relative_change"],
        report["psi_extrapolated"],
    )
    return report


def certainty_equivalent(field: ValueField) -> np.ndarray:
    """(1 / theta) log psi on every level."""
    return np.log(field.values) / field.theta_grid.nodes[:, None]


def check_value_bounds(field: ValueField, r_sup: float) -> CheckReport:
    """Lower/upper bounds, theta-monotonicity and the derivative estimate."""
    thetas = field.theta_grid.nodes
    psi = field.values
    upper = np.exp(thetas * r_sup / field.alpha)[:, None]
    lower_gap = float(psi.min() - 1.0)
    upper_gap = float(np.max(psi / upper) - 1.0)
    drops = float(np.max(psi[:-1] - psi[1:])) if psi.shape[0] > 1 else 0.0
    slopes = np.abs(np.diff(psi, axis=0)) / np.diff(thetas)[:, None]
    slope_bound = (r_sup / field.alpha) * np.exp(thetas[-1] * r_sup / field.alpha)
    max_slope = float(slopes.max()) if slopes.size else 0.0
    holds = (
        lower_gap >= -BOUND_SLACK
        and upper_gap <= BOUND_SLACK
        and drops <= MONOTONE_SLACK
        and max_slope <= slope_bound + BOUND_SLACK
    )
    return CheckReport(
        name=f"value_bounds_player{field.player}",
        holds=bool(holds),
        margin=float(min(lower_gap, -upper_gap, -drops, slope_bound - max_slope)),
        details={
            "min_psi_minus_one": lower_gap,
            "max_relative_excess": upper_gap,
            "max_theta_drop": drops,
            "max_theta_slope": max_slope,
            "slope_bound": slope_bound,
        },
    )


def theta_log_derivative_report(field: ValueField, r_sup: float) -> Dict[str, object]:
    """(1/psi) d psi / d theta against theta*||r||/alpha and ||r||/alpha.

    The weaker of the two bounds is the one enforced; which forms hold is
    logged.
    """
    thetas = field.theta_grid.nodes
    log_psi = np.log(field.values)
    derivative = np.diff(log_psi, axis=0) / np.diff(thetas)[:, None]
    per_level = derivative.max(axis=1)
    theta_form = thetas[1:] * r_sup / field.alpha
    plain_form = np.full_like(theta_form, r_sup / field.alpha)
    holds_theta = bool(np.all(per_level <= theta_form + BOUND_SLACK))
    holds_plain = bool(np.all(per_level <= plain_form + BOUND_SLACK))
    weaker = np.maximum(theta_form, plain_form)
    holds = bool(np.all(per_level <= weaker + BOUND_SLACK))
    logger.info(
        "log-derivative estimate: theta form %s, plain form %s",
        "holds" if holds_theta else "fails",
        "holds" if holds_plain else "fails",
    )
    return {
        "max_log_derivative": float(per_level.max()) if per_level.size else 0.0,
        "holds_theta_form": holds_theta,
        "holds_plain_form": holds_plain,
        "holds_weaker": holds,
    }


def value_summary(fields: List[ValueField], r_sups: Sequence[float]) -> List[Dict]:
    """Report entries for value fields."""
    out = []
    for field, r_sup in zip(fields, r_sups):
        bounds = check_value_bounds(field, r_sup)
        out.append(
            {
                "player": field.player,
                "alpha": field.alpha,
                "psi_min": float(field.values.min()),
                "psi_max": float(field.values.max()),
                "bounds": bounds.to_dict(),
                "log_derivative": theta_log_derivative_report(field, r_sup),
                "bound_slack": BOUND_SLACK,
            }
        )
    return out
