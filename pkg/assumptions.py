"""Checkers for the standing assumptions of the game.

Conditions are evaluated on the solver lattice refined by midpoints, at
every pure action pair: the generator is affine in each mixed action, so
its extremes over the simplices sit at vertices.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np

from errors import ConfigError, DomainTooSmallError
from game_model import (
    cost_lower_bound,
    cost_sup_norm,
    drift_sup_norm,
    generator_on_weight,
    lipschitz_bounds,
    min_ellipticity,
    power_derivatives,
    tabulate,
    weight_derivatives,
)
from models import Ball, CheckReport, GameSpec, Grid, LyapunovCertificate

logger = logging.getLogger(__name__)

DEFAULT_SLACK_TOL = 1e-9


def _require_inside(grid: Grid, ball: Ball, label: str) -> None:
    if not grid.contains_ball(ball):
        raise DomainTooSmallError(
            f"{label} (center {ball.center}, radius {ball.radius}) exceeds the "
            f"truncated domain with half-width {grid.half_width}"
        )


def _worst(expr: np.ndarray, points: np.ndarray, name: str, slack_tol: float) -> CheckReport:
    """Summarize expr[u1, u2, point] <= slack_tol."""
    flat = int(np.argmax(expr))
    u1, u2, idx = np.unravel_index(flat, expr.shape)
    worst = float(expr[u1, u2, idx])
    return CheckReport(
        name=name,
        holds=worst <= slack_tol,
        margin=-worst,
        worst_node=tuple(float(v) for v in points[idx]),
        worst_pair=(int(u1), int(u2)),
        details={"max_expression": worst, "slack_tol": slack_tol, "points": len(points)},
    )


def check_ellipticity(spec: GameSpec, grid: Grid, ellip_min: float = 1e-10) -> CheckReport:
    """Smallest eigenvalue of a(x) on the lattice against ``ellip_min``."""
    points = grid.refined().nodes
    eig = min_ellipticity(spec, points)
    idx = int(np.argmin(eig))
    return CheckReport(
        name="ellipticity",
        holds=bool(eig[idx] >= ellip_min),
        margin=float(eig[idx] - ellip_min),
        worst_node=tuple(float(v) for v in points[idx]),
        details={"min_eigenvalue": float(eig[idx]), "ellip_min": ellip_min},
    )


def check_boundedness(spec: GameSpec, grid: Grid) -> CheckReport:
    """Closed-form sup norms, cost sign and recorded Lipschitz bounds."""
    lows = [
        float(cost_lower_bound(spec, k, j).min()) for k in (1, 2) for j in (1, 2)
    ]
    details = {
        "cost_sup": [cost_sup_norm(spec, 1), cost_sup_norm(spec, 2)],
        "cost_sup_on_box": [
            cost_sup_norm(spec, 1, grid.half_width),
            cost_sup_norm(spec, 2, grid.half_width),
        ],
        "drift_sup": drift_sup_norm(spec),
        "cost_lower_bound": min(lows),
        "lipschitz": lipschitz_bounds(spec),
    }
    holds = min(lows) >= -1e-12 and np.isfinite(details["drift_sup"])
    return CheckReport(
        name="boundedness",
        holds=bool(holds),
        margin=min(lows),
        details=details,
    )


def check_lyapunov(
    spec: GameSpec,
    cert: LyapunovCertificate,
    grid: Grid,
    slack_tol: float = DEFAULT_SLACK_TOL,
) -> CheckReport:
    """L W + 2 delta W - c I_C <= slack_tol at every point and pure pair."""
    _require_inside(grid, cert.region, "Lyapunov set C")
    points = grid.refined().nodes
    tables = tabulate(spec, points)
    value, grad, hess = weight_derivatives(cert.weight, points)
    generator = generator_on_weight(tables, grad, hess)
    indicator = cert.region.contains(points).astype(float)
    expr = generator + (2.0 * cert.delta * value - cert.c * indicator)[None, None, :]
    report = _worst(expr, points, "lyapunov", slack_tol)
    if value.min() < 1.0 - 1e-12:
        report.holds = False
        report.messages.append(f"W drops to {value.min():.6g} < 1 on the lattice")
    logger.info("Lyapunov check: holds=%s margin=%.6g", report.holds, report.margin)
    return report


def check_small_cost(
    spec: GameSpec,
    theta: float,
    delta: float,
    half_width: Optional[Sequence[float]] = None,
) -> CheckReport:
    """theta * ||r_k|| <= delta for both players."""
    sups = [cost_sup_norm(spec, k, half_width) for k in (1, 2)]
    worst = max(sups)
    margin = delta - theta * worst
    return CheckReport(
        name="small_cost",
        holds=margin >= 0,
        margin=float(margin),
        details={"theta": theta, "delta": delta, "cost_sup": sups},
    )


def check_a5(
    spec: GameSpec,
    cert: LyapunovCertificate,
    grid: Grid,
    slack_tol: float = DEFAULT_SLACK_TOL,
) -> CheckReport:
    """L W^beta + h - c_hat I_C_hat <= slack_tol at every point and pure pair."""
    if cert.a5 is None:
        raise ConfigError("certificate carries no strengthened-condition data", "certificate.a5")
    data = cert.a5
    _require_inside(grid, data.region, "set C_hat")
    points = grid.refined().nodes
    tables = tabulate(spec, points)
    value, grad, hess = weight_derivatives(cert.weight, points)
    _, p_grad, p_hess = power_derivatives(value, grad, hess, data.beta)
    h_value, _, _ = weight_derivatives(data.h, points)
    indicator = data.region.contains(points).astype(float)
    expr = generator_on_weight(tables, p_grad, p_hess) + (
        h_value - data.c_hat * indicator
    )[None, None, :]
    report = _worst(expr, points, "lyapunov_power", slack_tol)
    report.details["beta"] = data.beta
    return report


def run_all_checks(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    cert: Optional[LyapunovCertificate] = None,
    ellip_min: float = 1e-10,
    slack_tol: float = DEFAULT_SLACK_TOL,
) -> List[CheckReport]:
    """Every check the configuration supports, in a fixed order."""
    reports = [check_ellipticity(spec, grid, ellip_min), check_boundedness(spec, grid)]
    if cert is not None:
        reports.append(check_lyapunov(spec, cert, grid, slack_tol))
        reports.append(check_small_cost(spec, theta, cert.delta, grid.half_width))
        if cert.a5 is not None:
            reports.append(check_a5(spec, cert, grid, slack_tol))
    for report in reports:
        if not report.holds:
            logger.warning("check %s failed (margin %.6g)", report.name, report.margin)
    return reports
