"""Evaluation of game terms, relaxed-control mixing and closed-form bounds."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, InvalidMixedActionError
from models import (
    Diffusion,
    DiffusionKind,
    FunctionTerm,
    GameSpec,
    MixedAction,
    TermKind,
    WeightFunction,
    WeightKind,
)

logger = logging.getLogger(__name__)


def evaluate_term(term: FunctionTerm, x: np.ndarray) -> np.ndarray:
    """Evaluate a term at points ``x`` (n, d); returns (m, n, out)."""
    x = np.atleast_2d(x)
    if term.kind is TermKind.CONSTANT:
        shape = (term.n_actions, x.shape[0], term.out_dim)
        return np.broadcast_to(term.value[:, None, :], shape).copy()
    if term.kind is TermKind.TANH_AFFINE:
        return term.value[:, None, :] + np.einsum("uod,nd->uno", term.slope, np.tanh(x))
    sq = np.sum((x - term.center) ** 2, axis=1)
    bump = np.exp(-sq / (2.0 * term.width**2))
    return term.value[:, None, :] * bump[None, :, None]


def evaluate_terms(
    terms: Sequence[FunctionTerm], x: np.ndarray, n_actions: int, out_dim: int
) -> np.ndarray:
    """Sum of terms at ``x``; an empty family is identically zero."""
    x = np.atleast_2d(x)
    total = np.zeros((n_actions, x.shape[0], out_dim))
    for term in terms:
        total += evaluate_term(term, x)
    return total


def _box(half_width: Optional[Sequence[float]], dimension: int) -> Optional[np.ndarray]:
    if half_width is None:
        return None
    return np.broadcast_to(np.asarray(half_width, dtype=float), (dimension,))


def term_sup(term: FunctionTerm, half_width: Optional[Sequence[float]] = None) -> np.ndarray:
    """Closed-form sup of |term| per (action, component) over the box (or R^d)."""
    if term.kind is TermKind.CONSTANT:
        return np.abs(term.value)
    if term.kind is TermKind.TANH_AFFINE:
        d = term.slope.shape[2]
        box = _box(half_width, d)
        reach = np.ones(d) if box is None else np.tanh(box)
        return np.abs(term.value) + np.abs(term.slope) @ reach
    d = term.center.size
    box = _box(half_width, d)
    near = 0.0 if box is None else np.sum(np.maximum(np.abs(term.center) - box, 0.0) ** 2)
    return np.abs(term.value) * np.exp(-near / (2.0 * term.width**2))


def term_inf(term: FunctionTerm, half_width: Optional[Sequence[float]] = None) -> np.ndarray:
    """Closed-form inf per (action, component) over the box (or R^d)."""
    if term.kind is TermKind.CONSTANT:
        return term.value.copy()
    if term.kind is TermKind.TANH_AFFINE:
        d = term.slope.shape[2]
        box = _box(half_width, d)
        reach = np.ones(d) if box is None else np.tanh(box)
        return term.value - np.abs(term.slope) @ reach
    d = term.center.size
    box = _box(half_width, d)
    width2 = 2.0 * term.width**2
    if box is None:
        far_factor = 0.0
        near_factor = 1.0
    else:
        far = np.sum((np.abs(term.center) + box) ** 2)
        near = np.sum(np.maximum(np.abs(term.center) - box, 0.0) ** 2)
        far_factor = np.exp(-far / width2)
        near_factor = np.exp(-near / width2)
    return np.where(term.value >= 0, term.value * far_factor, term.value * near_factor)


def term_lipschitz(term: FunctionTerm) -> np.ndarray:
    """Global Lipschitz bound per (action, component)."""
    if term.kind is TermKind.CONSTANT:
        return np.zeros_like(term.value)
    if term.kind is TermKind.TANH_AFFINE:
        return np.sqrt(np.sum(term.slope**2, axis=2))
    return np.abs(term.value) / (term.width * np.sqrt(np.e))


def _family_sup(terms, n_actions, out_dim, half_width) -> np.ndarray:
    total = np.zeros((n_actions, out_dim))
    for term in terms:
        total += term_sup(term, half_width)
    return total


def cost_sup_norm(
    spec: GameSpec, k: int, half_width: Optional[Sequence[float]] = None
) -> float:
    """||r_k||_inf over all pure pairs.

    Exact when the terms of each cost part share a maximizer, an upper
    bound otherwise.
    """
    own = _family_sup(spec.cost_terms(k, 1), spec.n_actions[0], 1, half_width)
    other = _family_sup(spec.cost_terms(k, 2), spec.n_actions[1], 1, half_width)
    return float(own.max() + other.max())


def cost_lower_bound(
    spec: GameSpec, k: int, j: int, half_width: Optional[Sequence[float]] = None
) -> np.ndarray:
    """Per-action lower bound of the cost part r_kj."""
    total = np.zeros(spec.n_actions[j - 1])
    for term in spec.cost_terms(k, j):
        total += term_inf(term, half_width)[:, 0]
    return total


def drift_sup_norm(spec: GameSpec, half_width: Optional[Sequence[float]] = None) -> float:
    """Largest componentwise bound of the combined drift."""
    d = spec.dimension
    one = _family_sup(spec.drift1, spec.n_actions[0], d, half_width).max(axis=0)
    two = _family_sup(spec.drift2, spec.n_actions[1], d, half_width).max(axis=0)
    return float(np.max(one + two))


def lipschitz_bounds(spec: GameSpec) -> Dict[str, float]:
    """Lipschitz constants implied by the family parameters (recorded, not enforced)."""
    bounds = {}
    for label in ("drift1", "drift2", "cost11", "cost12", "cost21", "cost22"):
        terms = getattr(spec, label)
        bounds[label] = float(sum(term_lipschitz(t).max() for t in terms)) if terms else 0.0
    if spec.diffusion.kind is DiffusionKind.DIAGONAL_TANH:
        bounds["sigma"] = float(np.max(np.abs(spec.diffusion.slope)))
    else:
        bounds["sigma"] = 0.0
    return bounds


def validate_spec(spec: GameSpec) -> None:
    """Reject cost families that can go negative anywhere on R^d."""
    for k in (1, 2):
        for j in (1, 2):
            for i, term in enumerate(spec.cost_terms(k, j)):
                if term.kind is TermKind.GAUSS_BUMP and np.any(term.value < 0):
                    raise ConfigError(
                        "gauss_bump cost weights must be >= 0",
                        f"game.cost{k}{j}[{i}]",
                    )
            low = cost_lower_bound(spec, k, j)
            if np.any(low < -1e-12):
                raise ConfigError(
                    f"cost can be negative (lower bound {low.min():.6g})",
                    f"game.cost{k}{j}",
                )


def diffusion_sigma(diffusion: Diffusion, x: np.ndarray) -> np.ndarray:
    """sigma(x) at points ``x``; returns (n, d, d)."""
    x = np.atleast_2d(x)
    n = x.shape[0]
    if diffusion.kind is DiffusionKind.CONSTANT:
        return np.broadcast_to(diffusion.matrix, (n,) + diffusion.matrix.shape).copy()
    diag = diffusion.base + diffusion.slope * np.tanh(x)
    sigma = np.zeros((n, x.shape[1], x.shape[1]))
    idx = np.arange(x.shape[1])
    sigma[:, idx, idx] = diag
    return sigma


def covariance(diffusion: Diffusion, x: np.ndarray) -> np.ndarray:
    """a(x) = sigma sigma^T at points ``x``."""
    sigma = diffusion_sigma(diffusion, x)
    return np.einsum("nij,nkj->nik", sigma, sigma)


def min_ellipticity(spec: GameSpec, x: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a(x) at each point."""
    return np.linalg.eigvalsh(covariance(spec.diffusion, x))[:, 0]


@dataclass
class GameTables:
    """Drift, cost and covariance tabulated at a fixed point set."""

    nodes: np.ndarray
    drift1: np.ndarray
    drift2: np.ndarray
    costs: Dict[Tuple[int, int], np.ndarray]
    covariance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def drift(self, player: int) -> np.ndarray:
        return self.drift1 if player == 1 else self.drift2

    def pair_drift(self) -> np.ndarray:
        """(m1, m2, n, d)."""
        return self.drift1[:, None] + self.drift2[None, :]

    def cost(self, k: int, j: int) -> np.ndarray:
        """Cost part r_kj at the nodes, (m_j, n)."""
        return self.costs[(k, j)]

    def pair_cost(self, k: int) -> np.ndarray:
        """r_k for every pure pair, (m1, m2, n)."""
        return self.costs[(k, 1)][:, None, :] + self.costs[(k, 2)][None, :, :]

    def mixed_cost(self, k: int, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
        """r_k under node-wise mixed actions w1 (n, m1), w2 (n, m2)."""
        return np.einsum("nu,un->n", w1, self.costs[(k, 1)]) + np.einsum(
            "nu,un->n", w2, self.costs[(k, 2)]
        )


def tabulate(spec: GameSpec, x: np.ndarray) -> GameTables:
    """Tabulate all game data at the points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m1, m2 = spec.n_actions
    d = spec.dimension
    costs = {}
    for k in (1, 2):
        costs[(k, 1)] = evaluate_terms(spec.cost_terms(k, 1), x, m1, 1)[:, :, 0]
        costs[(k, 2)] = evaluate_terms(spec.cost_terms(k, 2), x, m2, 1)[:, :, 0]
    return GameTables(
        nodes=x,
        drift1=evaluate_terms(spec.drift1, x, m1, d),
        drift2=evaluate_terms(spec.drift2, x, m2, d),
        costs=costs,
        covariance=covariance(spec.diffusion, x),
    )


def _check_action(v: MixedAction, n_actions: int, player: int) -> None:
    if v.n_actions != n_actions:
        raise InvalidMixedActionError(
            f"player {player} has {n_actions} actions, mixed action has {v.n_actions}"
        )


def mix_drift(spec: GameSpec, x: Sequence[float], v1: MixedAction, v2: MixedAction) -> np.ndarray:
    """Relaxed drift b(x, v1, v2) = sum v1 b1 + sum v2 b2."""
    _check_action(v1, spec.n_actions[0], 1)
    _check_action(v2, spec.n_actions[1], 2)
    point = np.asarray(x, dtype=float).reshape(1, -1)
    b1 = evaluate_terms(spec.drift1, point, spec.n_actions[0], spec.dimension)[:, 0, :]
    b2 = evaluate_terms(spec.drift2, point, spec.n_actions[1], spec.dimension)[:, 0, :]
    return v1.weights @ b1 + v2.weights @ b2


def mix_cost(
    spec: GameSpec, k: int, x: Sequence[float], v1: MixedAction, v2: MixedAction
) -> float:
    """Relaxed running cost r_k(x, v1, v2) >= 0."""
    _check_action(v1, spec.n_actions[0], 1)
    _check_action(v2, spec.n_actions[1], 2)
    point = np.asarray(x, dtype=float).reshape(1, -1)
    r1 = evaluate_terms(spec.cost_terms(k, 1), point, spec.n_actions[0], 1)[:, 0, 0]
    r2 = evaluate_terms(spec.cost_terms(k, 2), point, spec.n_actions[1], 1)[:, 0, 0]
    return float(max(v1.weights @ r1 + v2.weights @ r2, 0.0))


def weight_derivatives(
    fn: WeightFunction, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value (n,), gradient (n, d) and Hessian (n, d, d) of W or h."""
    x = np.atleast_2d(x)
    n, d = x.shape
    if fn.kind is WeightKind.CONSTANT:
        return np.full(n, fn.value), np.zeros((n, d)), np.zeros((n, d, d))
    if fn.kind is WeightKind.COSH:
        g = fn.gamma
        value = 1.0 + np.sum(np.cosh(g * x) - 1.0, axis=1)
        grad = g * np.sinh(g * x)
        hess = np.zeros((n, d, d))
        idx = np.arange(d)
        hess[:, idx, idx] = g**2 * np.cosh(g * x)
        return value, grad, hess
    sym = fn.q + fn.q.T
    value = 1.0 + np.einsum("ni,ij,nj->n", x, fn.q, x)
    grad = x @ sym.T
    hess = np.broadcast_to(sym, (n, d, d)).copy()
    return value, grad, hess


def power_derivatives(
    value: np.ndarray, grad: np.ndarray, hess: np.ndarray, beta: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivatives of W^beta from those of W."""
    first = beta * value ** (beta - 1.0)
    second = beta * (beta - 1.0) * value ** (beta - 2.0)
    p_grad = first[:, None] * grad
    p_hess = first[:, None, None] * hess + second[:, None, None] * np.einsum(
        "ni,nj->nij", grad, grad
    )
    return value**beta, p_grad, p_hess


def generator_on_weight(tables: GameTables, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """L f at every pure pair, (m1, m2, n), from the derivatives of f."""
    transport = np.einsum("abnd,nd->abn", tables.pair_drift(), grad)
    diffusion = 0.5 * np.einsum("nij,nji->n", tables.covariance, hess)
    return transport + diffusion[None, None, :]
