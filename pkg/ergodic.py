"""Ergodic risk-sensitive game as nonlinear principal-eigenvalue problems.

For a fixed selector the linear problem (Q_v + theta diag(r_v)) psi =
theta rho psi is solved by shifted inverse power iteration with the
normalization psi(anchor) = 1. Policy iteration over pure selectors gives
the best response; damped fictitious play couples the two players.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from discretize import Discretization, mixed_generator_apply, prepare
from errors import InvalidMixedActionError, PowerIterationStagnation
from game_model import weight_derivatives
from hjb import (
    evaluate_discounted,
    hamiltonian,
    lazy_keep,
    select_actions,
    selected_generator,
    tie_scale,
)
from models import (
    C0Set,
    CheckReport,
    DeviationReport,
    ErgodicNashReport,
    ErgodicSolution,
    GameSpec,
    Grid,
    LyapunovCertificate,
    Schedule,
    StrategyField,
    ThetaGrid,
    VanishingDiscountReport,
)

logger = logging.getLogger(__name__)

MAX_OUTER_ITERATIONS = 100
MAX_POWER_ITERATIONS = 20000
POWER_TOL = 1e-13
EIGEN_RESID_TOL = 1e-8
BOUND_SLACK = 1e-8
STRAT_TOL = 1e-4
RESID_TOL = 1e-3
DEV_TOL = 5e-3
CORE_FRACTION = 0.5


def c0_set(cert: LyapunovCertificate, grid: Grid) -> C0Set:
    """Nodes where W(x) > 1 + c / delta."""
    threshold = 1.0 + cert.c / cert.delta
    value, _, _ = weight_derivatives(cert.weight, grid.nodes)
    return C0Set(mask=value > threshold, threshold=threshold)


def default_anchor(grid: Grid, cert: Optional[LyapunovCertificate] = None) -> int:
    """Node maximizing W, or the node nearest the origin without a certificate."""
    if cert is None:
        return int(grid.nearest_index(np.zeros(grid.dimension))[0])
    c0 = c0_set(cert, grid)
    if c0.is_empty:
        logger.warning(
            "C0 = {W > %.6g} has no lattice node; enlarge the domain", c0.threshold
        )
    value, _, _ = weight_derivatives(cert.weight, grid.nodes)
    return int(np.argmax(value))


def _principal_eigen(
    operator: sp.csr_matrix,
    sigma: float,
    anchor: int,
    start: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """Principal eigenpair of ``operator`` with psi(anchor) = 1.

    sigma I - operator is a nonsingular M-matrix for sigma above the
    principal eigenvalue, so its inverse is non-negative and the power
    iteration on it converges to the positive eigenvector.
    """
    n = operator.shape[0]
    lu = splu((sigma * sp.identity(n, format="csc") - operator).tocsc())
    psi = np.ones(n) if start is None else start / start[anchor]
    lam = sigma
    diffs = []
    for _ in range(MAX_POWER_ITERATIONS):
        y = lu.solve(psi)
        lam = sigma - 1.0 / y[anchor]
        new = y / y[anchor]
        diff = float(np.max(np.abs(new - psi)) / np.max(np.abs(new)))
        psi = new
        if diff <= POWER_TOL:
            return lam, psi
        diffs.append(diff)
    q = diffs[-1] / diffs[-2] if len(diffs) > 1 and diffs[-2] > 0 else 1.0
    gap = (sigma - lam) * (1.0 / q - 1.0) if 0 < q < 1 else 0.0
    raise PowerIterationStagnation(
        f"inverse power iteration stalled after {MAX_POWER_ITERATIONS} steps "
        f"(last change {diffs[-1]:.3e})",
        gap,
    )


def _eigen_residual(operator, lam: float, psi: np.ndarray) -> float:
    return float(np.max(np.abs(operator @ psi - lam * psi)) / np.max(np.abs(psi)))


def _sigma(theta: float, r_sup: float) -> float:
    return theta * r_sup + 1.0


def _stationary(field: StrategyField, label: str) -> np.ndarray:
    if not field.stationary:
        raise InvalidMixedActionError(f"{label} strategy must be stationary")
    return field.weights


def evaluate_ergodic(
    disc: Discretization,
    theta: float,
    player: int,
    v1: StrategyField,
    v2: StrategyField,
    anchor: int,
    start: Optional[np.ndarray] = None,
) -> ErgodicSolution:
    """Linear eigenproblem for the fixed stationary pair (v1, v2)."""
    w1, w2 = _stationary(v1, "player 1"), _stationary(v2, "player 2")
    operator = disc.bank.mixed(w1, w2) + sp.diags(
        theta * disc.tables.mixed_cost(player, w1, w2)
    )
    operator = operator.tocsr()
    lam, psi = _principal_eigen(
        operator, _sigma(theta, disc.cost_sup[player - 1]), anchor, start
    )
    return ErgodicSolution(
        rho=lam / theta,
        psi=psi,
        anchor=anchor,
        player=player,
        theta=theta,
        eigen_residual=_eigen_residual(operator, lam, psi),
    )


def solve_ergodic_br(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    player: int,
    opponent: StrategyField,
    anchor: Optional[int] = None,
    *,
    disc: Optional[Discretization] = None,
    cert: Optional[LyapunovCertificate] = None,
    incumbent: Optional[StrategyField] = None,
    max_outer: int = MAX_OUTER_ITERATIONS,
) -> Tuple[ErgodicSolution, StrategyField]:
    """Optimal ergodic value of ``player`` against a stationary opponent.

    Selector cycling does not raise: the iterate with the smallest selector
    gap is returned with ``cycled`` set.
    """
    disc = disc or prepare(spec, grid)
    anchor = default_anchor(grid, cert) if anchor is None else anchor
    other = _stationary(opponent, "opponent")
    m = spec.n_actions[player - 1]
    n = grid.n_nodes
    nodes = np.arange(n)
    gens = disc.own_generators(player, other)
    reaction = theta * disc.own_costs(player, other)
    sigma = _sigma(theta, disc.cost_sup[player - 1])

    ones = np.ones(n)
    selector = select_actions(
        hamiltonian(gens, reaction, ones), tie_scale(gens, reaction, ones)
    )
    seen = set()
    best = None
    psi = None
    cycled = False
    for outer in range(1, max_outer + 1):
        operator = (
            selected_generator(gens, selector) + sp.diags(reaction[selector, nodes])
        ).tocsr()
        lam, psi = _principal_eigen(operator, sigma, anchor, psi)
        F = hamiltonian(gens, reaction, psi)
        scale = tie_scale(gens, reaction, psi)
        gap = float(np.max((F[selector, nodes] - F.min(axis=0)) / psi))
        if best is None or gap < best[0]:
            best = (gap, lam, psi, selector, F, scale, operator, outer)
        improved = select_actions(F, scale, selector)
        if np.array_equal(improved, selector):
            best = (gap, lam, psi, selector, F, scale, operator, outer)
            break
        seen.add(selector.tobytes())
        if improved.tobytes() in seen:
            cycled = True
            logger.warning(
                "player %d ergodic selector cycles after %d iterations", player, outer
            )
            break
        selector = improved
    else:
        cycled = True
        logger.warning(
            "player %d ergodic policy iteration hit %d iterations", player, max_outer
        )

    gap, lam, psi, selector, F, _, operator, outer = best
    weights = np.eye(m)[selector]
    if incumbent is not None:
        weights = lazy_keep(weights, _stationary(incumbent, "incumbent"), F, psi)
    solution = ErgodicSolution(
        rho=lam / theta,
        psi=psi,
        anchor=anchor,
        player=player,
        theta=theta,
        eigen_residual=_eigen_residual(operator, lam, psi),
        selector_gap=gap,
        outer_iterations=outer,
        cycled=cycled,
    )
    if solution.eigen_residual > EIGEN_RESID_TOL:
        logger.warning(
            "player %d eigen residual %.3e", player, solution.eigen_residual
        )
    logger.info("player %d ergodic solve: rho = %.10g", player, solution.rho)
    return solution, StrategyField(weights, player)


def coupled_ergodic_residuals(
    disc: Discretization,
    theta: float,
    pair: Tuple[StrategyField, StrategyField],
    solutions: Tuple[ErgodicSolution, ErgodicSolution],
) -> Tuple[float, float]:
    """Sup over nodes of the defect of the coupled eigen system, relative to psi."""
    w1 = _stationary(pair[0], "player 1")
    w2 = _stationary(pair[1], "player 2")
    residuals = []
    for k, solution in zip((1, 2), solutions):
        psi = solution.psi
        lhs = theta * solution.rho * psi
        at_pair = mixed_generator_apply(disc.bank, w1, w2, psi) + (
            theta * disc.tables.mixed_cost(k, w1, w2) * psi
        )
        own, other = (w1, w2) if k == 1 else (w2, w1)
        pure = []
        for u in range(own.shape[1]):
            dirac = np.zeros_like(own)
            dirac[:, u] = 1.0
            p1, p2 = (dirac, other) if k == 1 else (other, dirac)
            pure.append(
                mixed_generator_apply(disc.bank, p1, p2, psi)
                + theta * disc.tables.mixed_cost(k, p1, p2) * psi
            )
        best = np.min(pure, axis=0)
        defect = np.maximum(np.abs(at_pair - lhs), np.abs(best - lhs)) / psi
        residuals.append(float(defect.max()))
    return residuals[0], residuals[1]


def nash_iterate_ergodic(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    init: Tuple[StrategyField, StrategyField],
    anchor: Optional[int] = None,
    schedule: Schedule = Schedule.CONSTANT,
    *,
    damping: float = 0.5,
    strat_tol: float = STRAT_TOL,
    resid_tol: float = RESID_TOL,
    max_iter: int = 200,
    threads: int = 1,
    disc: Optional[Discretization] = None,
    cert: Optional[LyapunovCertificate] = None,
) -> ErgodicNashReport:
    """Damped fictitious play with the ergodic best response."""
    disc = disc or prepare(spec, grid, threads=threads)
    anchor = default_anchor(grid, cert) if anchor is None else anchor
    v1, v2 = (field if field.stationary else field.final() for field in init)

    def solve(player, own, other, lazy=True):
        return solve_ergodic_br(
            spec,
            grid,
            theta,
            player,
            other,
            anchor,
            disc=disc,
            incumbent=own if lazy else None,
        )

    def both(lazy=True):
        jobs = ((1, v1, v2, lazy), (2, v2, v1, lazy))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=2) as pool:
                return list(pool.map(lambda job: solve(*job), jobs))
        return [solve(*job) for job in jobs]

    history = []
    change = np.inf
    iterations = 0
    for m in range(max_iter):
        (_, br1), (_, br2) = both()
        beta = schedule.step(m, damping)
        new1, new2 = v1.blend(br1, beta), v2.blend(br2, beta)
        change = max(new1.sup_tv(v1), new2.sup_tv(v2))
        v1, v2 = new1, new2
        iterations = m + 1
        history.append({"iteration": iterations, "beta": beta, "change": change})
        logger.debug("ergodic fictitious play %d: change %.3e", iterations, change)
        if change <= strat_tol:
            break

    (sol1, _), (sol2, _) = both(lazy=False)
    residuals = coupled_ergodic_residuals(disc, theta, (v1, v2), (sol1, sol2))
    converged = change <= strat_tol and max(residuals) <= resid_tol
    if not converged:
        logger.warning(
            "ergodic Nash iteration stopped after %d iterations (change %.3e)",
            iterations,
            change,
        )
    return ErgodicNashReport(
        strategies=(v1, v2),
        solutions=(sol1, sol2),
        iterations=iterations,
        change=float(change),
        residuals=residuals,
        converged=converged,
        strat_tol=strat_tol,
        resid_tol=resid_tol,
        history=history,
    )


def deviation_test_ergodic(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    pair: Tuple[StrategyField, StrategyField],
    deviations: Sequence[StrategyField],
    dev_tol: float = DEV_TOL,
    anchor: Optional[int] = None,
    *,
    disc: Optional[Discretization] = None,
) -> DeviationReport:
    """Relative gain (rho_eq - rho_dev) / rho_dev of unilateral stationary deviations."""
    disc = disc or prepare(spec, grid)
    anchor = default_anchor(grid) if anchor is None else anchor
    baseline = {k: evaluate_ergodic(disc, theta, k, *pair, anchor).rho for k in (1, 2)}
    tiny = np.finfo(float).tiny
    per_player = [0.0, 0.0]
    worst_case = ""
    for index, deviation in enumerate(deviations):
        k = deviation.player
        deviated = (deviation, pair[1]) if k == 1 else (pair[0], deviation)
        rho = evaluate_ergodic(disc, theta, k, *deviated, anchor).rho
        gain = (baseline[k] - rho) / max(rho, tiny)
        if gain > per_player[k - 1]:
            per_player[k - 1] = gain
            if gain >= max(per_player):
                worst_case = f"player {k} deviation #{index}"
    return DeviationReport(
        worst_violation=max(per_player),
        per_player=(per_player[0], per_player[1]),
        n_deviations=len(deviations),
        dev_tol=dev_tol,
        worst_case=worst_case,
    )


def _extrapolate(alphas: np.ndarray, etas: np.ndarray) -> float:
    """Linear extrapolation to alpha = 0 through the two smallest alphas."""
    order = np.argsort(alphas)
    if order.size == 1:
        return float(etas[order[0]])
    a1, a2 = alphas[order[0]], alphas[order[1]]
    e1, e2 = etas[order[0]], etas[order[1]]
    return float(e1 - a1 * (e2 - e1) / (a2 - a1))


def _relative(value: float, reference: float) -> float:
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def vanishing_discount_check(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    player: int,
    pair: Tuple[StrategyField, StrategyField],
    alphas: Sequence[float],
    *,
    n_theta: int = 200,
    kappa_ratio: float = 1e-3,
    anchor: Optional[int] = None,
    core_fraction: float = CORE_FRACTION,
    disc: Optional[Discretization] = None,
) -> VanishingDiscountReport:
    """eta_alpha = alpha theta d(log psi)/d theta at ``theta`` for each alpha.

    The central difference of log psi sits on a theta node placed at the
    target; eta is averaged over the core of the lattice and compared to
    both theta rho and rho from the eigen solver. The one-sided quotient
    (psi_{j+1} - psi_j) / ((theta_{j+1} - theta_j) psi_j) is reported next to
    it as ``etas_forward`` with its own limit; it carries an O(dtheta) bias.
    """
    disc = disc or prepare(spec, grid)
    anchor = default_anchor(grid) if anchor is None else anchor
    v1, v2 = (field if field.stationary else field.final() for field in pair)
    theta_grid = ThetaGrid.around(theta, n_theta, kappa_ratio)
    thetas = theta_grid.nodes
    j = n_theta
    core = grid.core_mask(core_fraction)

    etas = []
    forward = []
    for alpha in alphas:
        field = evaluate_discounted(
            spec, grid, theta_grid, alpha, player, v1, v2, disc=disc
        )
        psi = field.values
        log_psi = np.log(psi)
        slope = (log_psi[j + 1] - log_psi[j - 1]) / (thetas[j + 1] - thetas[j - 1])
        eta = float(np.mean(alpha * thetas[j] * slope[core]))
        step = (psi[j + 1] - psi[j]) / ((thetas[j + 1] - thetas[j]) * psi[j])
        eta_forward = float(np.mean(alpha * thetas[j] * step[core]))
        logger.debug(
            "alpha %.4g: eta %.10g (forward difference %.10g)", alpha, eta, eta_forward
        )
        etas.append(eta)
        forward.append(eta_forward)

    alpha_arr = np.asarray(alphas, dtype=float)
    eta_arr = np.asarray(etas)
    limit = _extrapolate(alpha_arr, eta_arr)
    limit_forward = _extrapolate(alpha_arr, np.asarray(forward))
    logger.info(
        "vanishing discount: limit %.10g, forward-difference limit %.10g",
        limit,
        limit_forward,
    )
    rho = evaluate_ergodic(disc, theta, player, v1, v2, anchor).rho

    warnings = []
    ordered = eta_arr[np.argsort(alpha_arr)]
    steps = np.diff(ordered)
    noise = 1e-8 * max(1.0, float(np.max(np.abs(ordered))))
    monotone = bool(np.all(steps >= -noise) or np.all(steps <= noise))
    if not monotone:
        warnings.append("eta sequence is not monotone in alpha; limit unreliable")
        logger.warning(warnings[-1])

    err_theta_rho = _relative(limit, theta * rho)
    err_rho = _relative(limit, rho)
    return VanishingDiscountReport(
        alphas=[float(a) for a in alphas],
        etas=etas,
        limit=limit,
        rho=rho,
        theta=theta,
        rel_error_theta_rho=err_theta_rho,
        rel_error_rho=err_rho,
        normalization="theta_rho" if err_theta_rho <= err_rho else "rho",
        monotone=monotone,
        warnings=warnings,
        etas_forward=forward,
        limit_forward=limit_forward,
    )


def check_solution_bounds(
    solution: ErgodicSolution,
    grid: Grid,
    r_sup: float,
    cert: Optional[LyapunovCertificate] = None,
    slack: float = BOUND_SLACK,
) -> CheckReport:
    """psi <= W (1 + slack), psi >= 1 / W(x0) - slack on C0, 0 <= rho <= ||r||."""
    psi = solution.psi
    messages = []
    details = {
        "rho": solution.rho,
        "cost_sup": r_sup,
        "psi_min": float(psi.min()),
        "psi_at_anchor": float(psi[solution.anchor]),
    }
    margins = [solution.rho + slack, r_sup + slack - solution.rho, float(psi.min())]
    if solution.rho < -slack or solution.rho > r_sup + slack:
        messages.append(f"rho = {solution.rho:.10g} outside [0, {r_sup:.10g}]")
    if psi.min() <= 0:
        messages.append("psi is not positive")
    if cert is not None:
        weight, _, _ = weight_derivatives(cert.weight, grid.nodes)
        upper_gap = float(np.max(psi - weight * (1.0 + slack)))
        margins.append(-upper_gap)
        details["max_psi_minus_w"] = upper_gap
        if upper_gap > 0:
            messages.append("psi exceeds W")
        c0 = c0_set(cert, grid)
        if not c0.is_empty:
            floor = 1.0 / weight[solution.anchor] - slack
            lower_gap = float(np.min(psi[c0.mask]) - floor)
            margins.append(lower_gap)
            details["min_psi_on_c0_minus_floor"] = lower_gap
            if lower_gap < 0:
                messages.append("psi drops below 1 / W(x0) on C0")
    return CheckReport(
        name=f"ergodic_bounds_player{solution.player}",
        holds=not messages,
        margin=float(min(margins)),
        details=details,
        messages=messages,
    )
