"""Monotone finite-difference generators on the truncated lattice.

Every pure action pair shares one stencil pattern: the diagonal plus a
forward and a backward neighbour per dimension, with Neumann ghost nodes
folded back onto the interior neighbour. Coefficients are kept per pair as
rows of a (m1, m2, nnz) array so mixed generators are weighted sums.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from errors import MonotonicityError, StabilityBoundError
from game_model import GameTables, cost_sup_norm, tabulate
from models import GameSpec, Grid, StrategyField

logger = logging.getLogger(__name__)

CROSS_TOL = 1e-12


@dataclass
class GeneratorMatrix:
    """Discrete generator Q for one action pair (or a mixture)."""

    matrix: sp.csr_matrix
    pair: Optional[Tuple[int, int]] = None

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    @property
    def max_rate(self) -> float:
        return float(np.max(np.abs(self.matrix.diagonal())))


def _stencil_pattern(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the shared pattern, ghosts folded."""
    n = grid.n_nodes
    index = np.arange(n).reshape(grid.shape)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    for axis, count in enumerate(grid.shape):
        forward = np.roll(index, -1, axis=axis)
        backward = np.roll(index, 1, axis=axis)
        upper = [slice(None)] * grid.dimension
        lower = [slice(None)] * grid.dimension
        upper[axis] = count - 1
        lower[axis] = 0
        inner_upper = [slice(None)] * grid.dimension
        inner_lower = [slice(None)] * grid.dimension
        inner_upper[axis] = count - 2
        inner_lower[axis] = 1
        forward[tuple(upper)] = index[tuple(inner_upper)]
        backward[tuple(lower)] = index[tuple(inner_lower)]
        rows += [np.arange(n), np.arange(n)]
        cols += [forward.reshape(-1), backward.reshape(-1)]
    return np.concatenate(rows), np.concatenate(cols)


def _pair_coefficients(drift: np.ndarray, cov: np.ndarray, grid: Grid) -> np.ndarray:
    """Pattern-ordered coefficients for one drift field (n, d)."""
    blocks = []
    diagonal = np.zeros(drift.shape[0])
    for axis, dx in enumerate(grid.spacing):
        diffusion = 0.5 * cov[:, axis, axis] / dx**2
        up = diffusion + np.maximum(drift[:, axis], 0.0) / dx
        down = diffusion + np.maximum(-drift[:, axis], 0.0) / dx
        diagonal -= up + down
        blocks += [up, down]
    return np.concatenate([diagonal] + blocks)


def _check_cross_terms(cov: np.ndarray) -> None:
    d = cov.shape[1]
    if d == 1:
        return
    scale = np.max(np.abs(np.diagonal(cov, axis1=1, axis2=2)))
    off = cov - np.einsum("nii->ni", cov)[:, :, None] * np.eye(d)
    if np.max(np.abs(off)) > CROSS_TOL * max(scale, 1.0):
        raise MonotonicityError(
            "non-diagonal diffusion in two dimensions has no monotone stencil here; "
            "use a diagonal sigma"
        )


class GeneratorBank:
    """Generators of every pure action pair on a common sparsity pattern."""

    def __init__(self, grid: Grid, rows: np.ndarray, cols: np.ndarray, data: np.ndarray):
        self.grid = grid
        self.rows = rows
        self.cols = cols
        self.data = data
        n = grid.n_nodes
        keys = rows * n + cols
        unique, self._slot = np.unique(keys, return_inverse=True)
        self._indices = (unique % n).astype(np.int32)
        counts = np.bincount(unique // n, minlength=n)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self._n_slots = unique.size

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes

    @property
    def n_actions(self) -> Tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def _csr(self, entries: np.ndarray) -> sp.csr_matrix:
        values = np.bincount(self._slot, weights=entries, minlength=self._n_slots)
        n = self.n_nodes
        return sp.csr_matrix(
            (values, self._indices.copy(), self._indptr.copy()), shape=(n, n)
        )

    def pair(self, u1: int, u2: int) -> GeneratorMatrix:
        return GeneratorMatrix(self._csr(self.data[u1, u2]), (u1, u2))

    def mixed(self, w1: np.ndarray, w2: np.ndarray) -> sp.csr_matrix:
        """Generator under node-wise mixed actions w1 (n, m1), w2 (n, m2)."""
        entries = np.einsum("ka,kb,abk->k", w1[self.rows], w2[self.rows], self.data)
        return self._csr(entries)

    @property
    def max_rate(self) -> float:
        n = self.n_nodes
        return float(np.max(np.abs(self.data[:, :, :n])))


def build_generator(
    spec: GameSpec, grid: Grid, u1: int, u2: int, tables: Optional[GameTables] = None
) -> GeneratorMatrix:
    """Upwind generator for the pure pair (u1, u2)."""
    tables = tables or tabulate(spec, grid.nodes)
    _check_cross_terms(tables.covariance)
    rows, cols = _stencil_pattern(grid)
    drift = tables.drift1[u1] + tables.drift2[u2]
    bank = GeneratorBank(
        grid, rows, cols, _pair_coefficients(drift, tables.covariance, grid)[None, None]
    )
    return GeneratorMatrix(bank.pair(0, 0).matrix, (u1, u2))


def build_generators(
    spec: GameSpec,
    grid: Grid,
    tables: Optional[GameTables] = None,
    threads: int = 1,
) -> GeneratorBank:
    """Generators for all pure pairs; pairs are built concurrently."""
    tables = tables or tabulate(spec, grid.nodes)
    _check_cross_terms(tables.covariance)
    rows, cols = _stencil_pattern(grid)
    m1, m2 = spec.n_actions
    pairs = list(product(range(m1), range(m2)))

    def build(pair):
        u1, u2 = pair
        drift = tables.drift1[u1] + tables.drift2[u2]
        return _pair_coefficients(drift, tables.covariance, grid)

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(build, pairs))
    else:
        blocks = [build(pair) for pair in pairs]
    data = np.stack(blocks).reshape(m1, m2, -1)
    logger.debug("built %d generators on %d nodes", len(pairs), grid.n_nodes)
    return GeneratorBank(grid, rows, cols, data)


def _field_weights(field: Union[StrategyField, np.ndarray], level: int = -1) -> np.ndarray:
    if isinstance(field, StrategyField):
        return field.at_level(level)
    return np.asarray(field, dtype=float)


def mixed_generator_apply(
    bank: GeneratorBank,
    v1field: Union[StrategyField, np.ndarray],
    v2field: Union[StrategyField, np.ndarray],
    psi: np.ndarray,
    level: int = -1,
) -> np.ndarray:
    """sum over pure pairs of v1(u1) v2(u2) (Q_{u1,u2} psi), node by node.

    Evaluated pair by pair, independently of the assembled mixed matrices
    the level solvers use.
    """
    w1 = _field_weights(v1field, level)
    w2 = _field_weights(v2field, level)
    m1, m2 = bank.n_actions
    out = np.zeros(bank.n_nodes)
    for u1, u2 in product(range(m1), range(m2)):
        weight = w1[:, u1] * w2[:, u2]
        if not weight.any():
            continue
        out += weight * bank.pair(u1, u2).apply(psi)
    return out


def extract_chain(gen: Union[GeneratorMatrix, sp.spmatrix], dt: float) -> sp.csr_matrix:
    """Transition matrix P = I + dt Q of the embedded chain."""
    matrix = gen.matrix if isinstance(gen, GeneratorMatrix) else sp.csr_matrix(gen)
    rate = float(np.max(np.abs(matrix.diagonal()))) if matrix.shape[0] else 0.0
    bound = np.inf if rate == 0 else 1.0 / rate
    if dt > bound * (1.0 + 1e-12):
        raise StabilityBoundError(dt, bound)
    transition = (sp.identity(matrix.shape[0], format="csr") + dt * matrix).tocsr()
    if transition.nnz and transition.data.min() < 0:
        transition.data[transition.data < 0] = 0.0
    return transition


def is_monotone(matrix: sp.spmatrix, tol: float = 1e-12) -> bool:
    """Non-negative off-diagonals, non-positive diagonal, zero row sums."""
    coo = sp.coo_matrix(matrix)
    off = coo.row != coo.col
    scale = max(1.0, float(np.max(np.abs(coo.data))) if coo.nnz else 1.0)
    row_sums = np.asarray(matrix.sum(axis=1)).reshape(-1)
    return bool(
        np.all(coo.data[off] >= -tol * scale)
        and np.all(matrix.diagonal() <= tol * scale)
        and np.all(np.abs(row_sums) <= tol * scale)
    )


def check_monotone(bank: GeneratorBank) -> None:
    """Raise MonotonicityError unless every pure-pair generator is monotone."""
    m1, m2 = bank.n_actions
    for u1, u2 in product(range(m1), range(m2)):
        if not is_monotone(bank.pair(u1, u2).matrix):
            raise MonotonicityError(
                f"generator of action pair ({u1}, {u2}) has a negative off-diagonal "
                "or a non-zero row sum"
            )


@dataclass
class Discretization:
    """Tabulated game data and generators for one lattice."""

    spec: GameSpec
    grid: Grid
    tables: GameTables
    bank: GeneratorBank
    cost_sup: Tuple[float, float]

    def weights_for(self, player: int, own: np.ndarray, other: np.ndarray):
        """Order (own, other) node weights as (player 1, player 2)."""
        return (own, other) if player == 1 else (other, own)

    def own_generators(self, player: int, other: np.ndarray):
        """Generator per pure own action against mixed opponent weights."""
        m = self.spec.n_actions[player - 1]
        n = self.grid.n_nodes
        gens = []
        for u in range(m):
            own = np.zeros((n, m))
            own[:, u] = 1.0
            gens.append(self.bank.mixed(*self.weights_for(player, own, other)))
        return gens

    def own_costs(self, player: int, other: np.ndarray) -> np.ndarray:
        """r_k per pure own action against mixed opponent weights, (m, n)."""
        opponent = 2 if player == 1 else 1
        opp_part = np.einsum("nu,un->n", other, self.tables.cost(player, opponent))
        return self.tables.cost(player, player) + opp_part[None, :]


def prepare(spec: GameSpec, grid: Grid, threads: int = 1) -> Discretization:
    """Tabulate the game on ``grid`` and build every pure-pair generator."""
    tables = tabulate(spec, grid.nodes)
    bank = build_generators(spec, grid, tables=tables, threads=threads)
    check_monotone(bank)
    sups = (
        cost_sup_norm(spec, 1, grid.half_width),
        cost_sup_norm(spec, 2, grid.half_width),
    )
    return Discretization(spec, grid, tables, bank, sups)
