"""Brute-force references on small Markov chains.

Dense numpy only: multiplicative value iteration for the discounted
criterion, Perron roots of the twisted kernel for the ergodic one and
exhaustive search over pure stationary strategies. Nothing here calls the
PDE solvers; the chain comes from the same generators through
``extract_chain``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from discretize import Discretization, extract_chain, prepare
from errors import ConfigError, InvalidMixedActionError, ReducibleChainError
from models import GameSpec, Grid, StrategyField
from policy.strategy_factory import ENUMERATION_CAP, enumerate_pure_stationary

logger = logging.getLogger(__name__)

MAX_STATES = 50
STOCHASTIC_TOL = 1e-12
MAX_SQUARINGS = 64

Weights = Union[StrategyField, np.ndarray]


@dataclass
class ChainGame:
    """Pure-pair transition matrices and stage costs of a discrete chain."""

    transitions: np.ndarray
    costs: Dict[int, np.ndarray]
    dt: float
    states: Optional[np.ndarray] = None

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        n = self.transitions.shape[-1]
        if n > MAX_STATES:
            raise ConfigError(
                f"oracle chains hold at most {MAX_STATES} states, got {n}"
            )
        if self.transitions.min() < -STOCHASTIC_TOL:
            raise ConfigError("transition matrices have negative entries", "chain")
        rows = self.transitions.sum(axis=-1)
        if np.max(np.abs(rows - 1.0)) > STOCHASTIC_TOL:
            raise ConfigError("transition matrices are not row-stochastic", "chain")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[-1]

    @property
    def n_actions(self) -> Tuple[int, int]:
        return self.transitions.shape[0], self.transitions.shape[1]

    def cost_sup(self, player: int) -> float:
        return float(np.max(self.costs[player]))

    def mixed(
        self, player: int, v1: Weights, v2: Weights
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Transition matrix and cost of ``player`` under stationary weights."""
        w1, w2 = _weights(v1), _weights(v2)
        transition = np.einsum("xa,xb,abxy->xy", w1, w2, self.transitions)
        cost = np.einsum("xa,xb,abx->x", w1, w2, self.costs[player])
        return transition, cost

    def own_rows(
        self, player: int, opponent: Weights
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Transition rows (m, n, n) and costs (m, n) per pure own action."""
        w = _weights(opponent)
        if player == 1:
            rows = np.einsum("xb,abxy->axy", w, self.transitions)
            cost = np.einsum("xb,abx->ax", w, self.costs[1])
        else:
            rows = np.einsum("xa,abxy->bxy", w, self.transitions)
            cost = np.einsum("xa,abx->bx", w, self.costs[2])
        return rows, cost


def _weights(field: Weights) -> np.ndarray:
    if isinstance(field, StrategyField):
        if not field.stationary:
            raise InvalidMixedActionError("oracle strategies must be stationary")
        return field.weights
    return np.asarray(field, dtype=float)


def build_chain(
    spec: GameSpec, grid: Grid, dt: float, *, disc: Optional[Discretization] = None
) -> ChainGame:
    """Embedded chain P = I + dt Q of every pure pair on ``grid``."""
    disc = disc or prepare(spec, grid)
    m1, m2 = spec.n_actions
    n = grid.n_nodes
    transitions = np.empty((m1, m2, n, n))
    for u1 in range(m1):
        for u2 in range(m2):
            transitions[u1, u2] = extract_chain(disc.bank.pair(u1, u2), dt).toarray()
    costs = {k: disc.tables.pair_cost(k) for k in (1, 2)}
    return ChainGame(transitions, costs, dt, grid.nodes)


def horizon_steps(theta: float, alpha: float, kappa: float, dt: float) -> int:
    """Steps in T_kappa = log(theta / kappa) / alpha."""
    return int(round(math.log(theta / kappa) / alpha / dt))


def _discounted_recursion(
    transitions: np.ndarray,
    costs: np.ndarray,
    theta: float,
    alpha: float,
    kappa: float,
    r_sup: float,
    dt: float,
) -> np.ndarray:
    """Backward recursion for a batch of chains, (c, n, n) and (c, n)."""
    n_steps = horizon_steps(theta, alpha, kappa, dt)
    values = np.full(costs.shape, math.exp(kappa * r_sup / alpha))
    for step in range(n_steps - 1, -1, -1):
        factor = np.exp(theta * math.exp(-alpha * step * dt) * costs * dt)
        values = factor * np.einsum("cxy,cy->cx", transitions, values)
    return values


def vi_discounted(
    chain: ChainGame,
    theta: float,
    alpha: float,
    player: int,
    v1: Weights,
    v2: Weights,
    kappa: float,
    r_sup: Optional[float] = None,
) -> np.ndarray:
    """V_t = exp(theta e^{-alpha t} r dt) P V_{t+dt} from exp(kappa ||r|| / alpha).

    Args:
        chain: Chain game
        theta: Risk parameter at time 0
        alpha: Discount rate
        player: Player whose criterion is evaluated
        v1, v2: Stationary strategies
        kappa: Truncation level; the recursion runs over log(theta/kappa)/alpha
        r_sup: Cost sup norm for the terminal factor (chain maximum by default)

    Returns:
        Value per state at time 0
    """
    transition, cost = chain.mixed(player, v1, v2)
    r_sup = chain.cost_sup(player) if r_sup is None else r_sup
    return _discounted_recursion(
        transition[None], cost[None], theta, alpha, kappa, r_sup, chain.dt
    )[0]


def is_irreducible(transition: np.ndarray) -> bool:
    """Boolean reachability closure covers every pair of states."""
    n = transition.shape[0]
    reach = (transition > 0) | np.eye(n, dtype=bool)
    while True:
        closure = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(closure, reach):
            return bool(reach.all())
        reach = closure


def _perron_batch(kernels: np.ndarray, anchor: int) -> Tuple[np.ndarray, np.ndarray]:
    """Perron roots and anchor-normalized vectors of non-negative (c, n, n) kernels.

    Repeated squaring with renormalization drives each power towards the
    rank-one projector onto the Perron vector.
    """
    power = kernels / kernels.max(axis=(1, 2), keepdims=True)
    vectors = power.sum(axis=2)
    for _ in range(MAX_SQUARINGS):
        power = power @ power
        power /= power.max(axis=(1, 2), keepdims=True)
        updated = power.sum(axis=2)
        updated /= updated[:, anchor : anchor + 1]
        done = np.max(np.abs(updated - vectors)) <= 1e-14 * np.max(np.abs(updated))
        vectors = updated
        if done:
            break
    roots = np.einsum("cxy,cy->cx", kernels, vectors)[:, anchor]
    return roots, vectors


def perron_ergodic(
    chain: ChainGame,
    theta: float,
    player: int,
    v1: Weights,
    v2: Weights,
    anchor: int = 0,
) -> Tuple[float, np.ndarray]:
    """rho = log(lambda_max) / (theta dt) of K = diag(exp(theta r dt)) P."""
    if not theta > 0:
        raise ConfigError("must be positive", "theta")
    transition, cost = chain.mixed(player, v1, v2)
    if not is_irreducible(transition):
        raise ReducibleChainError("the mixed chain is reducible")
    kernel = np.exp(theta * cost * chain.dt)[:, None] * transition
    roots, vectors = _perron_batch(kernel[None], anchor)
    rho = math.log(roots[0]) / (theta * chain.dt)
    logger.debug("Perron root %.16g, rho %.12g", roots[0], rho)
    return rho, vectors[0]


def best_response_exhaustive(
    chain: ChainGame,
    theta: float,
    player: int,
    opponent: Weights,
    *,
    alpha: Optional[float] = None,
    kappa: Optional[float] = None,
    r_sup: Optional[float] = None,
    start: Optional[int] = None,
    anchor: int = 0,
    cap: int = ENUMERATION_CAP,
) -> Tuple[np.ndarray, float]:
    """Best pure stationary selector of ``player`` by full enumeration.

    With ``alpha`` and ``kappa`` the discounted value at ``start`` (the middle
    state by default) is minimized, otherwise the ergodic rho. Ties go to
    the first candidate in lexicographic order.
    """
    m = chain.n_actions[player - 1]
    n = chain.n_states
    candidates = enumerate_pure_stationary(n, m, cap)
    rows, cost = chain.own_rows(player, opponent)
    nodes = np.arange(n)
    transitions = rows[candidates, nodes]
    costs = cost[candidates, nodes]

    if alpha is not None:
        if kappa is None:
            raise ConfigError("the discounted criterion needs kappa", "kappa")
        start = n // 2 if start is None else start
        r_sup = chain.cost_sup(player) if r_sup is None else r_sup
        values = _discounted_recursion(
            transitions, costs, theta, alpha, kappa, r_sup, chain.dt
        )[:, start]
    else:
        kernels = np.exp(theta * costs * chain.dt)[:, :, None] * transitions
        roots, _ = _perron_batch(kernels, anchor)
        values = np.log(roots) / (theta * chain.dt)

    best = int(np.argmin(values))
    return candidates[best], float(values[best])


def stationary_average_cost(
    chain: ChainGame, player: int, v1: Weights, v2: Weights
) -> float:
    """sum pi(x) r(x) for the stationary law pi of the mixed chain."""
    transition, cost = chain.mixed(player, v1, v2)
    n = transition.shape[0]
    system = np.vstack([transition.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return float(pi @ cost)
