"""Euler-Maruyama simulation of the controlled diffusion and Monte-Carlo estimators.

Random numbers come from a counter-based Philox stream keyed by the seed;
the counter encodes (path index, step index), so a path sees the same
draws whatever batch or thread simulates it.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from errors import ConfigError, InvalidMixedActionError
from game_model import (
    GameTables,
    cost_sup_norm,
    diffusion_sigma,
    tabulate,
    weight_derivatives,
)
from models import (
    Ball,
    CostEstimate,
    EstimatorTag,
    GameSpec,
    Grid,
    LyapunovCertificate,
    MixingMode,
    SimConfig,
    StrategyField,
    ThetaGrid,
)

logger = logging.getLogger(__name__)

BATCH_SIZE = 4096
ESS_SHARE = 0.5
CAP_FRACTION = 0.01
_UNIT = 2.0**-53


class CounterRNG:
    """Philox4x64 keyed by (seed, stream), one counter block per path and step."""

    def __init__(self, seed: int, stream: int = 0):
        self.key = np.array([seed, stream], dtype=np.uint64)

    def raw(self, step: int, first_path: int, n_paths: int) -> np.ndarray:
        """Four raw 64-bit words per path, shape (n_paths, 4)."""
        counter = np.array([first_path, 0, step, 0], dtype=np.uint64)
        bitgen = np.random.Philox(key=self.key, counter=counter)
        return bitgen.random_raw(4 * n_paths).reshape(n_paths, 4)

    def draws(
        self, step: int, first_path: int, n_paths: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Two standard normals and two uniforms on [0, 1) per path."""
        uniforms = (self.raw(step, first_path, n_paths) >> np.uint64(11)) * _UNIT
        radius = np.sqrt(-2.0 * np.log(1.0 - uniforms[:, 0]))
        angle = 2.0 * np.pi * uniforms[:, 1]
        normals = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        return normals, uniforms[:, 2:]


@dataclass
class PathStep:
    """State of a batch of paths before step ``step`` is taken."""

    step: int
    time: float
    x: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    tables: GameTables
    final: bool = False

    def cost(self, player: int) -> np.ndarray:
        return np.maximum(self.tables.mixed_cost(player, self.w1, self.w2), 0.0)


def reflect(x: np.ndarray, half_width: Sequence[float]) -> np.ndarray:
    """Fold points back into [-L, L]^d by mirror reflection."""
    L = np.asarray(half_width, dtype=float)
    period = 4.0 * L
    y = np.mod(x + L, period)
    y = np.where(y > 2.0 * L, period - y, y)
    return y - L


def _sample(weights: np.ndarray, uniform: np.ndarray) -> np.ndarray:
    """One-hot draws from per-path mixed actions."""
    cdf = np.cumsum(weights, axis=1)
    cdf[:, -1] = np.inf
    choice = np.argmax(uniform[:, None] < cdf, axis=1)
    return np.eye(weights.shape[1])[choice]


def _level(field: StrategyField, theta_grid, theta, alpha, time) -> int:
    if field.stationary:
        return 0
    if theta_grid is None or theta is None or alpha is None:
        raise InvalidMixedActionError(
            "time-dependent strategies need the theta grid, theta and alpha"
        )
    return theta_grid.nearest_level(theta * math.exp(-alpha * time))


def simulate_paths(
    spec: GameSpec,
    grid: Grid,
    v1: StrategyField,
    v2: StrategyField,
    x_init: Sequence[float],
    simcfg: SimConfig,
    *,
    n_steps: Optional[int] = None,
    first_path: int = 0,
    n_paths: Optional[int] = None,
    theta_grid: Optional[ThetaGrid] = None,
    theta: Optional[float] = None,
    alpha: Optional[float] = None,
) -> Iterator[PathStep]:
    """Stream the pre-step states of a path batch, then the terminal state.

    Strategies are looked up at the nearest node; time-dependent ones at the
    level of theta exp(-alpha t).
    """
    simcfg.check_against(grid)
    steps = simcfg.n_steps if n_steps is None else n_steps
    count = simcfg.n_paths if n_paths is None else n_paths
    rng = CounterRNG(simcfg.seed)
    d = spec.dimension
    x = np.broadcast_to(np.asarray(x_init, dtype=float), (count, d)).copy()
    sqrt_dt = math.sqrt(simcfg.dt)

    def weights(time: float, idx: np.ndarray):
        w1 = v1.at_level(_level(v1, theta_grid, theta, alpha, time))[idx]
        w2 = v2.at_level(_level(v2, theta_grid, theta, alpha, time))[idx]
        return w1, w2

    for n in range(steps):
        time = n * simcfg.dt
        w1, w2 = weights(time, grid.nearest_index(x))
        normals, uniforms = rng.draws(n, first_path, count)
        if simcfg.mixing is MixingMode.SAMPLE:
            w1, w2 = _sample(w1, uniforms[:, 0]), _sample(w2, uniforms[:, 1])
        tables = tabulate(spec, x)
        yield PathStep(n, time, x, w1, w2, tables)
        drift = np.einsum("nu,und->nd", w1, tables.drift1) + np.einsum(
            "nu,und->nd", w2, tables.drift2
        )
        sigma = diffusion_sigma(spec.diffusion, x)
        noise = np.einsum("nij,nj->ni", sigma, normals[:, :d])
        x = reflect(x + drift * simcfg.dt + sqrt_dt * noise, grid.half_width)

    time = steps * simcfg.dt
    w1, w2 = weights(time, grid.nearest_index(x))
    yield PathStep(steps, time, x, w1, w2, tabulate(spec, x), final=True)


def _batched(fn: Callable[[int, int], Tuple], n_paths: int, threads: int) -> List[Tuple]:
    """Run ``fn(first_path, count)`` over path batches, results in batch order."""
    batches = [
        (first, min(BATCH_SIZE, n_paths - first))
        for first in range(0, n_paths, BATCH_SIZE)
    ]
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda b: fn(*b), batches))
    return [fn(*b) for b in batches]


def _collect(parts: List[Tuple], index: int) -> np.ndarray:
    return np.concatenate([part[index] for part in parts])


def _mean(values: np.ndarray) -> float:
    return math.fsum(values) / values.size


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    mean = _mean(values)
    return math.sqrt(math.fsum((values - mean) ** 2) / (values.size - 1) / values.size)


def auto_horizon(theta: float, alpha: float, r_sup: float, tail_tol: float) -> float:
    """Smallest T with theta exp(-alpha T) ||r|| / alpha <= tail_tol."""
    if theta * r_sup <= alpha * tail_tol:
        return 0.0
    return math.log(theta * r_sup / (alpha * tail_tol)) / alpha


def mc_discounted(
    spec: GameSpec,
    grid: Grid,
    v1: StrategyField,
    v2: StrategyField,
    x: Sequence[float],
    theta: float,
    alpha: float,
    player: int,
    simcfg: SimConfig,
    *,
    theta_grid: Optional[ThetaGrid] = None,
    threads: int = 1,
) -> CostEstimate:
    """E[exp(theta int exp(-alpha t) r dt)] with an auto-extended horizon.

    The discount weight is integrated exactly over each step; the cost is
    taken at the pre-step state.
    """
    r_sup = cost_sup_norm(spec, player, grid.half_width)
    horizon = max(simcfg.horizon, auto_horizon(theta, alpha, r_sup, simcfg.tail_tol))
    n_steps = int(math.ceil(horizon / simcfg.dt - 1e-9))
    horizon = n_steps * simcfg.dt
    tail = theta * r_sup * math.exp(-alpha * horizon) / alpha

    def batch(first: int, count: int):
        exponent = np.zeros(count)
        neutral = np.zeros(count)
        for state in simulate_paths(
            spec,
            grid,
            v1,
            v2,
            x,
            simcfg,
            n_steps=n_steps,
            first_path=first,
            n_paths=count,
            theta_grid=theta_grid,
            theta=theta,
            alpha=alpha,
        ):
            if state.final:
                break
            t0 = state.time
            weight = (math.exp(-alpha * t0) - math.exp(-alpha * (t0 + simcfg.dt))) / alpha
            cost = state.cost(player)
            neutral += weight * cost
            exponent += theta * weight * cost
        return np.exp(exponent), neutral

    parts = _batched(batch, simcfg.n_paths, threads)
    samples = _collect(parts, 0)
    neutral = _collect(parts, 1)
    estimate, stderr = _mean(samples), _stderr(samples)
    risk_neutral = _mean(neutral)
    logger.info("discounted MC: %.10g +/- %.3g over %d paths", estimate, stderr, samples.size)
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=samples.size,
        tag=EstimatorTag.DISCOUNTED,
        lower=(estimate - 3.0 * stderr) * math.exp(-tail),
        upper=(estimate + 3.0 * stderr) * math.exp(tail),
        horizon=horizon,
        extras={
            "tail_bound": tail,
            "risk_neutral_mean": risk_neutral,
            "jensen_floor": math.exp(theta * risk_neutral),
            "dt": simcfg.dt,
        },
        samples=samples,
    )


def _log_mean_exp(exponent: np.ndarray, theta: float, horizon: float):
    """(1 / theta T) log mean exp(exponent), delta-method stderr and top-path share."""
    n = exponent.size
    estimate = (logsumexp(exponent) - math.log(n)) / (theta * horizon)
    weights = np.exp(exponent - exponent.max())
    total = math.fsum(weights)
    stderr = _stderr(weights) / (total / n) / (theta * horizon)
    return float(estimate), stderr, float(weights.max() / total)


def mc_ergodic(
    spec: GameSpec,
    grid: Grid,
    v1: StrategyField,
    v2: StrategyField,
    x: Sequence[float],
    theta: float,
    player: int,
    simcfg: SimConfig,
    *,
    threads: int = 1,
) -> CostEstimate:
    """(1 / theta T) log E[exp(theta int_0^T r dt)] at T and 2T.

    Finite-path log-mean-exp is biased downward; the report says so.
    """
    if not (v1.stationary and v2.stationary):
        raise InvalidMixedActionError("ergodic simulation needs stationary strategies")
    n_steps = simcfg.n_steps
    horizon = n_steps * simcfg.dt

    def batch(first: int, count: int):
        total = np.zeros(count)
        at_horizon = None
        for state in simulate_paths(
            spec,
            grid,
            v1,
            v2,
            x,
            simcfg,
            n_steps=2 * n_steps,
            first_path=first,
            n_paths=count,
        ):
            if state.step == n_steps:
                at_horizon = total.copy()
            if state.final:
                break
            total += state.cost(player) * simcfg.dt
        return at_horizon, total

    parts = _batched(batch, simcfg.n_paths, threads)
    first_sum = _collect(parts, 0)
    second_sum = _collect(parts, 1)
    estimate, stderr, share = _log_mean_exp(theta * first_sum, theta, horizon)
    estimate_2t, stderr_2t, share_2t = _log_mean_exp(theta * second_sum, theta, 2 * horizon)

    warnings = ["log-mean-exp over finitely many paths is biased downward"]
    if max(share, share_2t) > ESS_SHARE:
        warnings.append(
            f"one path carries {max(share, share_2t):.0%} of the exponential mass; "
            "estimate unreliable"
        )
        logger.warning(warnings[-1])
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=first_sum.size,
        tag=EstimatorTag.ERGODIC,
        lower=estimate - 3.0 * stderr,
        upper=estimate + 3.0 * stderr,
        horizon=horizon,
        warnings=warnings,
        extras={
            "estimate_2T": estimate_2t,
            "stderr_2T": stderr_2t,
            "drift_2T_minus_T": estimate_2t - estimate,
            "max_weight_share": max(share, share_2t),
        },
        samples=first_sum,
    )


def _ball_in_c0(grid: Grid, cert: LyapunovCertificate, ball: Ball) -> None:
    inside = ball.contains(grid.nodes)
    value, _, _ = weight_derivatives(cert.weight, grid.nodes[inside])
    if not inside.any() or np.any(value <= 1.0 + cert.c / cert.delta):
        raise ConfigError("target ball must lie inside C0 = {W > 1 + c/delta}", "simulation.ball")


def mc_hitting_bound(
    spec: GameSpec,
    grid: Grid,
    v1: StrategyField,
    v2: StrategyField,
    x: Sequence[float],
    cert: LyapunovCertificate,
    ball: Ball,
    simcfg: SimConfig,
    *,
    threads: int = 1,
) -> CostEstimate:
    """E[exp(delta tau)] for the entry time tau into ``ball``, against W(x).

    Paths still outside at the horizon are counted at the horizon; a cap
    fraction above one percent makes the check inconclusive.
    """
    _ball_in_c0(grid, cert, ball)
    bound = float(weight_derivatives(cert.weight, np.atleast_2d(x))[0][0])

    def batch(first: int, count: int):
        tau = np.full(count, np.nan)
        for state in simulate_paths(
            spec, grid, v1, v2, x, simcfg, first_path=first, n_paths=count
        ):
            hit = np.isnan(tau) & ball.contains(state.x)
            tau[hit] = state.time
            if state.final or not np.isnan(tau).any():
                break
        capped = np.isnan(tau)
        tau[capped] = simcfg.n_steps * simcfg.dt
        return np.exp(cert.delta * tau), capped

    parts = _batched(batch, simcfg.n_paths, threads)
    samples = _collect(parts, 0)
    cap_fraction = float(np.mean(_collect(parts, 1)))
    estimate, stderr = _mean(samples), _stderr(samples)
    holds = estimate <= bound + 3.0 * stderr
    warnings = []
    if cap_fraction > CAP_FRACTION:
        warnings.append(f"{cap_fraction:.1%} of paths hit the time cap; inconclusive")
        logger.warning(warnings[-1])
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=samples.size,
        tag=EstimatorTag.HITTING,
        lower=estimate - 3.0 * stderr,
        upper=estimate + 3.0 * stderr,
        horizon=simcfg.n_steps * simcfg.dt,
        warnings=warnings,
        extras={"bound": bound, "holds": bool(holds), "cap_fraction": cap_fraction},
        samples=samples,
    )


def mc_power_lyapunov(
    spec: GameSpec,
    grid: Grid,
    v1: StrategyField,
    v2: StrategyField,
    x: Sequence[float],
    theta: float,
    player: int,
    cert: LyapunovCertificate,
    simcfg: SimConfig,
    *,
    threads: int = 1,
) -> CostEstimate:
    """E[exp(theta int r) W(X_T)] against (W(x) + c T) E[exp(theta int r)]."""
    horizon = simcfg.n_steps * simcfg.dt
    w_start = float(weight_derivatives(cert.weight, np.atleast_2d(x))[0][0])
    factor = w_start + cert.c * horizon

    def batch(first: int, count: int):
        exponent = np.zeros(count)
        for state in simulate_paths(
            spec, grid, v1, v2, x, simcfg, first_path=first, n_paths=count
        ):
            if state.final:
                terminal = weight_derivatives(cert.weight, state.x)[0]
                break
            exponent += theta * state.cost(player) * simcfg.dt
        mass = np.exp(exponent)
        return mass * terminal, mass

    parts = _batched(batch, simcfg.n_paths, threads)
    weighted = _collect(parts, 0)
    mass = _collect(parts, 1)
    excess = weighted - factor * mass
    holds = _mean(excess) <= 3.0 * _stderr(excess)
    estimate, stderr = _mean(weighted), _stderr(weighted)
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=weighted.size,
        tag=EstimatorTag.POWER_LYAPUNOV,
        lower=estimate - 3.0 * stderr,
        upper=estimate + 3.0 * stderr,
        horizon=horizon,
        extras={
            "bound": factor * _mean(mass),
            "mean_excess": _mean(excess),
            "excess_stderr": _stderr(excess),
            "holds": bool(holds),
        },
        samples=weighted,
    )


def _chain_walk(
    transition: sp.spmatrix,
    start: int,
    n_steps: int,
    n_paths: int,
    seed: int,
    step_fn: Callable[[int, int, np.ndarray], None],
) -> None:
    """Advance chain paths, calling ``step_fn(first_path, step, states)`` before each move."""
    cdf = np.cumsum(np.asarray(sp.csr_matrix(transition).todense()), axis=1)
    cdf[:, -1] = np.inf
    rng = CounterRNG(seed, stream=1)

    def batch(first: int, count: int):
        states = np.full(count, start, dtype=np.int64)
        for n in range(n_steps):
            step_fn(first, n, states)
            _, uniforms = rng.draws(n, first, count)
            states = np.argmax(uniforms[:, 0][:, None] < cdf[states], axis=1)
        return ()

    _batched(batch, n_paths, threads=1)


def mc_discounted_chain(
    transition: sp.spmatrix,
    cost: np.ndarray,
    start: int,
    theta: float,
    alpha: float,
    dt: float,
    kappa: float,
    r_sup: float,
    n_paths: int,
    seed: int,
) -> CostEstimate:
    """Discounted criterion of the embedded chain over T_kappa = log(theta/kappa)/alpha.

    Left-point sums with a terminal factor exp(kappa ||r|| / alpha), the same
    recursion the value-iteration oracle runs.
    """
    n_steps = int(round(math.log(theta / kappa) / alpha / dt))
    exponent = np.full(n_paths, kappa * r_sup / alpha)

    def accumulate(first: int, n: int, states: np.ndarray):
        exponent[first:first + states.size] += (
            theta * math.exp(-alpha * n * dt) * cost[states] * dt
        )

    _chain_walk(transition, start, n_steps, n_paths, seed, accumulate)
    samples = np.exp(exponent)
    estimate, stderr = _mean(samples), _stderr(samples)
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=n_paths,
        tag=EstimatorTag.DISCOUNTED,
        lower=estimate - 3.0 * stderr,
        upper=estimate + 3.0 * stderr,
        horizon=n_steps * dt,
        samples=samples,
    )


def mc_ergodic_chain(
    transition: sp.spmatrix,
    cost: np.ndarray,
    start: int,
    theta: float,
    dt: float,
    horizon: float,
    n_paths: int,
    seed: int,
) -> CostEstimate:
    """(1 / theta T) log E[exp(theta sum r dt)] along the embedded chain."""
    n_steps = int(round(horizon / dt))
    total = np.zeros(n_paths)

    def accumulate(first: int, n: int, states: np.ndarray):
        total[first:first + states.size] += cost[states] * dt

    _chain_walk(transition, start, n_steps, n_paths, seed, accumulate)
    estimate, stderr, share = _log_mean_exp(theta * total, theta, n_steps * dt)
    warnings = ["log-mean-exp over finitely many paths is biased downward"]
    if share > ESS_SHARE:
        warnings.append(f"one path carries {share:.0%} of the exponential mass")
    return CostEstimate(
        estimate=estimate,
        stderr=stderr,
        n_paths=n_paths,
        tag=EstimatorTag.ERGODIC,
        lower=estimate - 3.0 * stderr,
        upper=estimate + 3.0 * stderr,
        horizon=n_steps * dt,
        warnings=warnings,
        extras={"max_weight_share": share},
        samples=total,
    )
