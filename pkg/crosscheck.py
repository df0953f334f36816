"""Cross-validation of the PDE solvers against simulation and chain oracles.

Each check yields ``CrosscheckRow`` entries; the CLI renders them as a
pass/fail matrix.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from discretize import Discretization, prepare
from ergodic import evaluate_ergodic
from hjb import evaluate_discounted
from models import (
    CrosscheckRow,
    GameSpec,
    Grid,
    MixingMode,
    SimConfig,
    StrategyField,
    ThetaGrid,
)
from oracle import build_chain, perron_ergodic, vi_discounted
from policy.strategy_factory import initial_pair
from simulate import mc_discounted, mc_discounted_chain, mc_ergodic_chain

logger = logging.getLogger(__name__)

PDE_ORACLE_TOL = 2e-3
MC_ERGODIC_TOL = 0.05
ROBUSTNESS_TOL = 1e-3


def _row(
    name: str, reference: float, candidate: float, tolerance: float
) -> CrosscheckRow:
    if reference == 0:
        difference = abs(candidate)
    else:
        difference = abs(candidate - reference) / abs(reference)
    row = CrosscheckRow(
        name=name,
        reference=float(reference),
        candidate=float(candidate),
        difference=float(difference),
        tolerance=float(tolerance),
        passed=bool(difference <= tolerance),
    )
    logger.info(
        "%s: %.10g vs %.10g (%.3e, tol %.3e)",
        name,
        reference,
        candidate,
        difference,
        tolerance,
    )
    return row


def _mc_tolerance(reference: float, stderr: float, relative: float) -> float:
    """Relative tolerance max(relative, 3 stderr / |reference|)."""
    return max(relative, 3.0 * stderr / max(abs(reference), np.finfo(float).tiny))


def discounted_triangle(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    alpha: float,
    player: int,
    pair: Tuple[StrategyField, StrategyField],
    *,
    dt: float,
    n_theta: int,
    kappa_ratio: float,
    n_paths: int,
    seed: int,
    mixing: MixingMode = MixingMode.SAMPLE,
    start: Optional[int] = None,
    disc: Optional[Discretization] = None,
) -> List[CrosscheckRow]:
    """PDE value at one node against value iteration and both Monte-Carlo walkers."""
    disc = disc or prepare(spec, grid)
    start = grid.n_nodes // 2 if start is None else start
    theta_grid = ThetaGrid.around(theta, n_theta, kappa_ratio)
    field = evaluate_discounted(spec, grid, theta_grid, alpha, player, *pair, disc=disc)
    pde = float(field.values[n_theta, start])

    r_sup = disc.cost_sup[player - 1]
    chain = build_chain(spec, grid, dt, disc=disc)
    oracle = float(
        vi_discounted(
            chain, theta, alpha, player, *pair, kappa=theta_grid.kappa, r_sup=r_sup
        )[start]
    )
    transition, cost = chain.mixed(player, *pair)
    mc = mc_discounted_chain(
        transition,
        cost,
        start,
        theta,
        alpha,
        dt,
        theta_grid.kappa,
        r_sup,
        n_paths,
        seed,
    )
    simcfg = SimConfig(dt=dt, horizon=0.0, n_paths=n_paths, seed=seed, mixing=mixing)
    sde = mc_discounted(
        spec,
        grid,
        *pair,
        grid.nodes[start],
        theta,
        alpha,
        player,
        simcfg,
        theta_grid=theta_grid,
    )
    mc_tol = _mc_tolerance(oracle, mc.stderr, PDE_ORACLE_TOL)
    return [
        _row("discounted pde vs oracle", oracle, pde, PDE_ORACLE_TOL),
        _row("discounted mc vs oracle", oracle, mc.estimate, mc_tol),
        _row(
            "discounted mc vs pde",
            pde,
            mc.estimate,
            _mc_tolerance(pde, mc.stderr, PDE_ORACLE_TOL),
        ),
        _row(
            "discounted sde mc vs pde",
            pde,
            sde.estimate,
            _mc_tolerance(pde, sde.stderr, PDE_ORACLE_TOL),
        ),
    ]


def ergodic_triangle(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    player: int,
    pair: Tuple[StrategyField, StrategyField],
    *,
    dt: float,
    horizon: float,
    n_paths: int,
    seed: int,
    start: Optional[int] = None,
    disc: Optional[Discretization] = None,
) -> List[CrosscheckRow]:
    """Eigen solver, Perron root of the twisted chain kernel and chain Monte Carlo."""
    disc = disc or prepare(spec, grid)
    start = grid.n_nodes // 2 if start is None else start
    pde = evaluate_ergodic(disc, theta, player, *pair, anchor=start).rho
    chain = build_chain(spec, grid, dt, disc=disc)
    oracle, _ = perron_ergodic(chain, theta, player, *pair, anchor=start)
    transition, cost = chain.mixed(player, *pair)
    mc = mc_ergodic_chain(transition, cost, start, theta, dt, horizon, n_paths, seed)
    return [
        _row("ergodic pde vs perron", oracle, pde, PDE_ORACLE_TOL),
        _row(
            "ergodic mc vs perron",
            oracle,
            mc.estimate,
            _mc_tolerance(oracle, mc.stderr, MC_ERGODIC_TOL),
        ),
    ]


def kappa_halving_check(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    player: int,
    pair: Tuple[StrategyField, StrategyField],
    tol: float = ROBUSTNESS_TOL,
    *,
    disc: Optional[Discretization] = None,
) -> CrosscheckRow:
    """psi at the cap with kappa and kappa / 2 at the same log step."""
    disc = disc or prepare(spec, grid)
    v1, v2 = (f if f.stationary else f.final() for f in pair)
    extra = int(round(np.log(2.0) / theta_grid.log_step))
    halved = ThetaGrid(
        theta_grid.kappa * np.exp(-extra * theta_grid.log_step),
        theta_grid.cap,
        theta_grid.n_steps + extra,
    )
    base = evaluate_discounted(spec, grid, theta_grid, alpha, player, v1, v2, disc=disc)
    fine = evaluate_discounted(spec, grid, halved, alpha, player, v1, v2, disc=disc)
    change = float(np.max(np.abs(fine.values[-1] / base.values[-1] - 1.0)))
    return CrosscheckRow(
        name="kappa halving",
        reference=float(np.max(base.values[-1])),
        candidate=float(np.max(fine.values[-1])),
        difference=change,
        tolerance=tol,
        passed=change <= tol,
    )


def domain_doubling_check(
    spec: GameSpec,
    grid: Grid,
    theta_grid: ThetaGrid,
    alpha: float,
    theta: float,
    player: int,
    tol: float = ROBUSTNESS_TOL,
    init: str = "uniform",
) -> List[CrosscheckRow]:
    """psi on the central half of the domain and rho after doubling L.

    The fixed pair is rebuilt on each lattice from the same initial kind.
    """
    wide = grid.with_half_width([2.0 * L for L in grid.half_width])
    rows = []
    results = {}
    for label, lattice in (("base", grid), ("doubled", wide)):
        disc = prepare(spec, lattice)
        pair = initial_pair(init, lattice.n_nodes, spec.n_actions)
        origin = int(lattice.nearest_index(np.zeros(spec.dimension))[0])
        field = evaluate_discounted(
            spec, lattice, theta_grid, alpha, player, *pair, disc=disc
        )
        rho = evaluate_ergodic(disc, theta, player, *pair, anchor=origin).rho
        results[label] = (lattice, field.values[-1], rho)

    _, base_psi, base_rho = results["base"]
    _, wide_psi, wide_rho = results["doubled"]
    core = grid.core_mask(0.5)
    mapped = wide.nearest_index(grid.nodes[core])
    change = float(np.max(np.abs(wide_psi[mapped] / base_psi[core] - 1.0)))
    rows.append(
        CrosscheckRow(
            name="domain doubling psi",
            reference=float(np.max(base_psi[core])),
            candidate=float(np.max(wide_psi[mapped])),
            difference=change,
            tolerance=tol,
            passed=change <= tol,
        )
    )
    rows.append(_row("domain doubling rho", base_rho, wide_rho, tol))
    return rows


def run_crosscheck(
    spec: GameSpec,
    grid: Grid,
    theta: float,
    alpha: float,
    pair: Tuple[StrategyField, StrategyField],
    *,
    dt: float,
    n_theta: int,
    kappa_ratio: float,
    horizon: float,
    n_paths: int,
    seed: int,
    mixing: MixingMode = MixingMode.SAMPLE,
) -> List[CrosscheckRow]:
    """Full triangle for both players."""
    disc = prepare(spec, grid)
    rows = []
    for player in (1, 2):
        for row in discounted_triangle(
            spec,
            grid,
            theta,
            alpha,
            player,
            pair,
            dt=dt,
            n_theta=n_theta,
            kappa_ratio=kappa_ratio,
            n_paths=n_paths,
            seed=seed,
            mixing=mixing,
            disc=disc,
        ) + ergodic_triangle(
            spec,
            grid,
            theta,
            player,
            pair,
            dt=dt,
            horizon=horizon,
            n_paths=n_paths,
            seed=seed,
            disc=disc,
        ):
            row.name = f"player {player}: {row.name}"
            rows.append(row)
    return rows
