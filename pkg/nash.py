"""Best-response maps and damped fictitious play for the discounted game."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np

from discretize import Discretization, mixed_generator_apply, prepare
from hjb import evaluate_discounted, fitted_reaction, solve_discounted
from models import (
    DeviationReport,
    GameSpec,
    Grid,
    NashReport,
    Schedule,
    StrategyField,
    ThetaGrid,
    ValueField,
)

logger = logging.getLogger(__name__)

STRAT_TOL = 1e-4
RESID_TOL = 1e-3
MAX_ITER = 200
DEV_TOL = 5e-3


def best_response(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    player: int,
    opponent: StrategyField,
    *,
    disc: Optional[Discretization] = None,
    incumbent: Optional[StrategyField] = None,
) -> StrategyField:
    """An element of H_k(opponent): the minimizing selector of ``player``."""
    _, strategy = solve_discounted(
        spec, grid, theta_grid, alpha, player, opponent, disc=disc, incumbent=incumbent
    )
    return strategy


def _pair_solves(disc, theta_grid, alpha, v1, v2, threads, lazy=True):
    """Both best responses against the current pair."""

    def solve(player: int):
        opponent = v2 if player == 1 else v1
        own = v1 if player == 1 else v2
        return solve_discounted(
            disc.spec,
            disc.grid,
            theta_grid,
            alpha,
            player,
            opponent,
            disc=disc,
            incumbent=own if lazy else None,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            return tuple(pool.map(solve, (1, 2)))
    return solve(1), solve(2)


def coupled_residuals(
    disc: Discretization,
    theta_grid: ThetaGrid,
    alpha: float,
    pair: Tuple[StrategyField, StrategyField],
    values: Tuple[ValueField, ValueField],
) -> Tuple[float, float]:
    """Sup defect of both discretized equations, relative to psi.

    For each player the defect at a level is the larger of
    |alpha (psi_j - psi_{j-1}) / ds - F(v*)| and |alpha (...) / ds - min_u F_u|,
    with F evaluated pair by pair through ``mixed_generator_apply``.
    """
    v1, v2 = pair
    thetas = theta_grid.nodes
    ds = theta_grid.log_step
    residuals = []
    for k, field in zip((1, 2), values):
        psi = field.values
        m = disc.spec.n_actions[k - 1]
        worst = 0.0
        for j in range(1, theta_grid.n_levels):
            w1, w2 = v1.at_level(j), v2.at_level(j)
            own, other = (w1, w2) if k == 1 else (w2, w1)
            lhs = (alpha / ds) * (psi[j] - psi[j - 1])
            cost = disc.tables.mixed_cost(k, w1, w2)
            reaction = fitted_reaction(cost, thetas[j - 1], thetas[j], alpha, ds)
            at_pair = mixed_generator_apply(disc.bank, w1, w2, psi[j]) + reaction * psi[j]
            pure = []
            for u in range(m):
                dirac = np.zeros_like(own)
                dirac[:, u] = 1.0
                p1, p2 = (dirac, other) if k == 1 else (other, dirac)
                r_u = disc.tables.mixed_cost(k, p1, p2)
                g_u = fitted_reaction(r_u, thetas[j - 1], thetas[j], alpha, ds)
                pure.append(mixed_generator_apply(disc.bank, p1, p2, psi[j]) + g_u * psi[j])
            best = np.min(pure, axis=0)
            defect = np.maximum(np.abs(lhs - at_pair), np.abs(lhs - best)) / psi[j]
            worst = max(worst, float(defect.max()))
        residuals.append(worst)
    return residuals[0], residuals[1]


def nash_iterate(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    init: Tuple[StrategyField, StrategyField],
    schedule: Schedule = Schedule.CONSTANT,
    *,
    damping: float = 0.5,
    strat_tol: float = STRAT_TOL,
    resid_tol: float = RESID_TOL,
    max_iter: int = MAX_ITER,
    threads: int = 1,
    disc: Optional[Discretization] = None,
) -> NashReport:
    """Damped fictitious play v <- (1 - beta) v + beta BR(v).

    Non-convergence is reported through ``converged``, never raised.
    """
    disc = disc or prepare(spec, grid, threads=threads)
    v1, v2 = init
    history = []
    change = np.inf
    iterations = 0
    for m in range(max_iter):
        (_, br1), (_, br2) = _pair_solves(disc, theta_grid, alpha, v1, v2, threads)
        beta = schedule.step(m, damping)
        new1, new2 = v1.blend(br1, beta), v2.blend(br2, beta)
        change = max(new1.sup_tv(v1), new2.sup_tv(v2))
        v1, v2 = new1, new2
        iterations = m + 1
        history.append({"iteration": iterations, "beta": beta, "change": change})
        logger.debug("fictitious play iteration %d: change %.3e", iterations, change)
        if change <= strat_tol:
            break

    (value1, _), (value2, _) = _pair_solves(disc, theta_grid, alpha, v1, v2, threads)
    residuals = coupled_residuals(disc, theta_grid, alpha, (v1, v2), (value1, value2))
    converged = change <= strat_tol and max(residuals) <= resid_tol
    if converged:
        logger.info("Nash iteration converged after %d iterations", iterations)
    else:
        logger.warning(
            "Nash iteration stopped after %d iterations (change %.3e, residuals %.3e, %.3e)",
            iterations,
            change,
            residuals[0],
            residuals[1],
        )
    return NashReport(
        strategies=(v1, v2),
        values=(value1, value2),
        iterations=iterations,
        change=float(change),
        residuals=residuals,
        converged=converged,
        strat_tol=strat_tol,
        resid_tol=resid_tol,
        history=history,
    )


def deviation_test(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    pair: Tuple[StrategyField, StrategyField],
    deviations: Sequence[StrategyField],
    dev_tol: float = DEV_TOL,
    *,
    disc: Optional[Discretization] = None,
) -> DeviationReport:
    """Largest relative gain (J_eq - J_dev) / J_dev over the listed deviations."""
    disc = disc or prepare(spec, grid)
    baseline = {
        k: evaluate_discounted(spec, grid, theta_grid, alpha, k, *pair, disc=disc).values
        for k in (1, 2)
    }
    per_player = [0.0, 0.0]
    worst_case = ""
    for index, deviation in enumerate(deviations):
        k = deviation.player
        deviated = (deviation, pair[1]) if k == 1 else (pair[0], deviation)
        values = evaluate_discounted(
            spec, grid, theta_grid, alpha, k, *deviated, disc=disc
        ).values
        gain = float(np.max((baseline[k] - values) / values))
        if gain > per_player[k - 1]:
            per_player[k - 1] = gain
            if gain >= max(per_player):
                worst_case = f"player {k} deviation #{index}"
    worst = max(per_player)
    if worst > dev_tol:
        logger.warning("deviation test: %s gains %.3e", worst_case, worst)
    return DeviationReport(
        worst_violation=worst,
        per_player=(per_player[0], per_player[1]),
        n_deviations=len(deviations),
        dev_tol=dev_tol,
        worst_case=worst_case,
    )


def fixed_point_consistency(
    report: NashReport,
    theta_grid: ThetaGrid,
    alpha: float,
    disc: Discretization,
) -> float:
    """Fraction of (level, node) cells where a fresh best response moves."""
    v1, v2 = report.strategies
    (_, br1), (_, br2) = _pair_solves(disc, theta_grid, alpha, v1, v2, threads=1)
    moved = []
    for own, br in ((v1, br1), (v2, br2)):
        weights = np.broadcast_to(own.weights, br.weights.shape)
        tv = 0.5 * np.abs(weights - br.weights).sum(axis=-1)
        moved.append(float(np.mean(tv > report.strat_tol)))
    return max(moved)
