"""Data models for the risk-sensitive game solver."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, InvalidMixedActionError

MIN_INTERIOR_NODES = 8
SIMPLEX_TOL = 1e-12


class TermKind(Enum):
    """Parametric families for drift and cost terms."""

    CONSTANT = "constant"
    TANH_AFFINE = "tanh_affine"
    GAUSS_BUMP = "gauss_bump"


class WeightKind(Enum):
    """Families for Lyapunov functions W and inf-compact functions h."""

    CONSTANT = "constant"
    COSH = "cosh"
    QUADRATIC = "quadratic"


class DiffusionKind(Enum):
    """Supported diffusion coefficients."""

    CONSTANT = "constant"
    DIAGONAL_TANH = "diagonal_tanh"


class Schedule(Enum):
    """Damping schedules for fictitious play."""

    CONSTANT = "constant"
    HARMONIC = "harmonic"

    def step(self, iteration: int, damping: float) -> float:
        """Averaging weight for a zero-based iteration counter."""
        if self is Schedule.HARMONIC:
            return 1.0 / (iteration + 1)
        return damping


class MixingMode(Enum):
    """How simulated paths realize mixed actions."""

    SAMPLE = "sample"
    AVERAGE = "average"


class EstimatorTag(Enum):
    """Scale a Monte-Carlo estimate is reported on."""

    DISCOUNTED = "discounted"
    ERGODIC = "ergodic"
    HITTING = "hitting"
    POWER_LYAPUNOV = "power_lyapunov"


def _enum(enum_cls, raw: Any, key: str):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise ConfigError(f"unknown value {raw!r} (expected one of {allowed})", key)


def _shaped(raw: Any, shape: Tuple[int, ...], key: str) -> np.ndarray:
    """Coerce a config value to ``shape``, broadcasting scalars."""
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected numbers", key)
    if arr.size == 1:
        return np.full(shape, float(arr.reshape(-1)[0]))
    if arr.size != int(np.prod(shape)):
        raise ConfigError(f"expected {int(np.prod(shape))} values {shape}", key)
    return arr.reshape(shape)


@dataclass
class FunctionTerm:
    """One bounded, Lipschitz term of a drift or cost family.

    Arrays are indexed by pure action first:
    ``value`` is (m, out), ``slope`` is (m, out, d) and ``value`` doubles as
    the bump weight p(u) for gauss bumps.
    """

    kind: TermKind
    value: np.ndarray
    slope: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    width: float = 1.0

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if self.value.ndim != 2:
            raise ConfigError("term values must be indexed by (action, component)")
        if self.kind is TermKind.TANH_AFFINE:
            if self.slope is None:
                raise ConfigError("tanh_affine terms need a slope")
            self.slope = np.asarray(self.slope, dtype=float)
            if self.slope.shape[:2] != self.value.shape or self.slope.ndim != 3:
                raise ConfigError("tanh_affine slope must be (actions, out, d)")
        if self.kind is TermKind.GAUSS_BUMP:
            if self.center is None:
                raise ConfigError("gauss_bump terms need a center")
            self.center = np.asarray(self.center, dtype=float).reshape(-1)
            if not self.width > 0:
                raise ConfigError("gauss_bump width must be positive")

    @property
    def n_actions(self) -> int:
        return self.value.shape[0]

    @property
    def out_dim(self) -> int:
        return self.value.shape[1]

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        weight_key = "weight" if self.kind is TermKind.GAUSS_BUMP else "value"
        data: Dict[str, Any] = {"kind": self.kind.value, weight_key: self.value.tolist()}
        if self.slope is not None:
            data["slope"] = self.slope.tolist()
        if self.center is not None:
            data["center"] = self.center.tolist()
            data["width"] = self.width
        return data

    @classmethod
    def from_dict(
        cls, data: Dict, n_actions: int, out_dim: int, dimension: int, key: str = ""
    ) -> "FunctionTerm":
        """Create a term from a config table.

        Args:
            data: Table with ``kind`` and the family parameters
            n_actions: Number of pure actions of the owning player
            out_dim: 1 for costs, d for drifts
            dimension: State dimension d
            key: Dotted config key used in error messages

        Returns:
            FunctionTerm with normalized array shapes
        """
        kind = _enum(TermKind, data.get("kind"), f"{key}.kind")
        weight_key = "weight" if kind is TermKind.GAUSS_BUMP else "value"
        if weight_key not in data:
            raise ConfigError("missing", f"{key}.{weight_key}")
        value = _shaped(data[weight_key], (n_actions, out_dim), f"{key}.{weight_key}")
        slope = None
        center = None
        width = 1.0
        if kind is TermKind.TANH_AFFINE:
            raw = np.asarray(data.get("slope", 0.0), dtype=float)
            full = (n_actions, out_dim, dimension)
            if raw.size == n_actions * dimension and out_dim == dimension > 1:
                # per-action vectors act componentwise
                slope = np.einsum("ud,de->ude", raw.reshape(n_actions, dimension),
                                  np.eye(dimension))
            else:
                slope = _shaped(raw, full, f"{key}.slope")
        elif kind is TermKind.GAUSS_BUMP:
            center = _shaped(data.get("center", 0.0), (dimension,), f"{key}.center")
            width = float(data.get("width", 1.0))
            if not width > 0:
                raise ConfigError("must be positive", f"{key}.width")
        return cls(kind=kind, value=value, slope=slope, center=center, width=width)


@dataclass
class Diffusion:
    """Diffusion coefficient sigma(x)."""

    kind: DiffusionKind
    matrix: Optional[np.ndarray] = None
    base: Optional[np.ndarray] = None
    slope: Optional[np.ndarray] = None
    floor: float = 1e-6

    def __post_init__(self):
        if self.kind is DiffusionKind.CONSTANT:
            self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            if self.matrix.shape[0] != self.matrix.shape[1]:
                raise ConfigError("diffusion matrix must be square")
        else:
            self.base = np.asarray(self.base, dtype=float).reshape(-1)
            self.slope = np.asarray(self.slope, dtype=float).reshape(-1)
            if not self.floor > 0:
                raise ConfigError("diagonal_tanh floor must be positive")
            if np.any(self.base - np.abs(self.slope) < self.floor):
                raise ConfigError(
                    "diagonal_tanh needs base - |slope| >= floor in every component"
                )

    @property
    def dimension(self) -> int:
        if self.kind is DiffusionKind.CONSTANT:
            return self.matrix.shape[0]
        return self.base.size

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        if self.kind is DiffusionKind.CONSTANT:
            return {"kind": self.kind.value, "matrix": self.matrix.tolist()}
        return {
            "kind": self.kind.value,
            "base": self.base.tolist(),
            "slope": self.slope.tolist(),
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, data: Dict, dimension: int) -> "Diffusion":
        """Create instance from dictionary."""
        kind = _enum(DiffusionKind, data.get("kind", "constant"), "game.diffusion.kind")
        if kind is DiffusionKind.CONSTANT:
            raw = np.asarray(data.get("matrix", 1.0), dtype=float)
            if raw.size == 1:
                matrix = float(raw.reshape(-1)[0]) * np.eye(dimension)
            elif raw.size == dimension:
                matrix = np.diag(raw.reshape(-1))
            else:
                matrix = _shaped(raw, (dimension, dimension), "game.diffusion.matrix")
            return cls(kind=kind, matrix=matrix)
        return cls(
            kind=kind,
            base=_shaped(data.get("base"), (dimension,), "game.diffusion.base"),
            slope=_shaped(data.get("slope", 0.0), (dimension,), "game.diffusion.slope"),
            floor=float(data.get("floor", 1e-6)),
        )


@dataclass
class GameSpec:
    """Two-player game with additive drift and cost structure.

    ``cost_terms(k, j)`` is the part of player k's running cost driven by
    player j's action; an empty list means the part is identically zero.
    """

    dimension: int
    n_actions: Tuple[int, int]
    diffusion: Diffusion
    drift1: List[FunctionTerm] = field(default_factory=list)
    drift2: List[FunctionTerm] = field(default_factory=list)
    cost11: List[FunctionTerm] = field(default_factory=list)
    cost12: List[FunctionTerm] = field(default_factory=list)
    cost21: List[FunctionTerm] = field(default_factory=list)
    cost22: List[FunctionTerm] = field(default_factory=list)
    name: str = "game"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError("dimension must be 1 or 2", "game.dimension")
        self.n_actions = (int(self.n_actions[0]), int(self.n_actions[1]))
        if min(self.n_actions) < 1:
            raise ConfigError("every player needs at least one action", "game.actions")
        if self.diffusion.dimension != self.dimension:
            raise ConfigError("diffusion dimension mismatch", "game.diffusion")
        for player in (1, 2):
            for term in self.drift_terms(player):
                self._check_term(term, player, self.dimension, f"game.drift{player}")
            for k in (1, 2):
                for term in self.cost_terms(k, player):
                    self._check_term(term, player, 1, f"game.cost{k}{player}")

    def _check_term(self, term: FunctionTerm, player: int, out: int, key: str):
        if term.n_actions != self.n_actions[player - 1] or term.out_dim != out:
            raise ConfigError(
                f"expected ({self.n_actions[player - 1]}, {out}) values, "
                f"got {term.value.shape}",
                key,
            )
        if term.slope is not None and term.slope.shape[2] != self.dimension:
            raise ConfigError("slope dimension mismatch", key)

    def drift_terms(self, player: int) -> List[FunctionTerm]:
        return self.drift1 if player == 1 else self.drift2

    def cost_terms(self, k: int, j: int) -> List[FunctionTerm]:
        return getattr(self, f"cost{k}{j}")

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        data: Dict[str, Any] = {
            "name": self.name,
            "dimension": self.dimension,
            "actions": list(self.n_actions),
            "diffusion": self.diffusion.to_dict(),
        }
        for label in ("drift1", "drift2", "cost11", "cost12", "cost21", "cost22"):
            data[label] = [term.to_dict() for term in getattr(self, label)]
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "GameSpec":
        """Create instance from a ``[game]`` table."""
        try:
            dimension = int(data["dimension"])
            actions = data["actions"]
            m1, m2 = int(actions[0]), int(actions[1])
        except KeyError as e:
            raise ConfigError("missing", f"game.{e.args[0]}")
        except (TypeError, ValueError, IndexError):
            raise ConfigError("expected [m1, m2]", "game.actions")
        sizes = {1: m1, 2: m2}

        def terms(label: str, player: int, out: int) -> List[FunctionTerm]:
            raw = data.get(label, [])
            if isinstance(raw, dict):
                raw = [raw]
            return [
                FunctionTerm.from_dict(
                    item, sizes[player], out, dimension, key=f"game.{label}[{i}]"
                )
                for i, item in enumerate(raw)
            ]

        return cls(
            dimension=dimension,
            n_actions=(m1, m2),
            diffusion=Diffusion.from_dict(data.get("diffusion", {}), dimension),
            drift1=terms("drift1", 1, dimension),
            drift2=terms("drift2", 2, dimension),
            cost11=terms("cost11", 1, 1),
            cost12=terms("cost12", 2, 1),
            cost21=terms("cost21", 1, 1),
            cost22=terms("cost22", 2, 1),
            name=str(data.get("name", "game")),
        )


@dataclass
class MixedAction:
    """Probability vector over a player's pure actions."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidMixedActionError(
                f"weights must be non-negative and sum to 1, got {self.weights}"
            )

    @property
    def n_actions(self) -> int:
        return self.weights.size

    @classmethod
    def dirac(cls, index: int, n_actions: int) -> "MixedAction":
        weights = np.zeros(n_actions)
        weights[index] = 1.0
        return cls(weights)

    @classmethod
    def uniform(cls, n_actions: int) -> "MixedAction":
        return cls(np.full(n_actions, 1.0 / n_actions))


@dataclass
class StrategyField:
    """Mixed action per (theta level, node) or, when stationary, per node."""

    weights: np.ndarray
    player: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim not in (2, 3):
            raise InvalidMixedActionError("strategy weights must be 2- or 3-dimensional")
        sums = self.weights.sum(axis=-1)
        if np.any(self.weights < 0) or np.any(np.abs(sums - 1.0) > 1e-10):
            raise InvalidMixedActionError(
                f"player {self.player} strategy has entries off the simplex"
            )

    @property
    def stationary(self) -> bool:
        return self.weights.ndim == 2

    @property
    def n_actions(self) -> int:
        return self.weights.shape[-1]

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[-2]

    @property
    def n_levels(self) -> Optional[int]:
        return None if self.stationary else self.weights.shape[0]

    def at_level(self, level: int) -> np.ndarray:
        """Node-by-action weights used at a theta level."""
        if self.stationary:
            return self.weights
        return self.weights[level]

    def final(self) -> "StrategyField":
        """Stationary strategy the field settles into for large t."""
        return StrategyField(self.at_level(-1).copy(), self.player)

    def blend(self, other: "StrategyField", beta: float) -> "StrategyField":
        """Convex combination (1 - beta) * self + beta * other."""
        mixed = (1.0 - beta) * self.weights + beta * other.weights
        return StrategyField(np.clip(mixed, 0.0, 1.0), self.player)

    def sup_tv(self, other: "StrategyField") -> float:
        """Sup over nodes (and levels) of the total-variation distance."""
        diff = np.abs(self.weights - other.weights)
        return float(0.5 * diff.sum(axis=-1).max())

    def with_player(self, player: int) -> "StrategyField":
        return StrategyField(self.weights.copy(), player)

    @classmethod
    def dirac(cls, actions: np.ndarray, n_actions: int, player: int) -> "StrategyField":
        """Pure strategy from an action index array of shape (nodes,) or (levels, nodes)."""
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(n_actions)[actions], player)

    @classmethod
    def uniform(
        cls, n_nodes: int, n_actions: int, player: int, n_levels: Optional[int] = None
    ) -> "StrategyField":
        shape = (n_nodes, n_actions) if n_levels is None else (n_levels, n_nodes, n_actions)
        return cls(np.full(shape, 1.0 / n_actions), player)


@dataclass(frozen=True)
class Grid:
    """Tensor lattice over [-L, L]^d with Neumann (reflecting) closure."""

    half_width: Tuple[float, ...]
    spacing: Tuple[float, ...]

    def __post_init__(self):
        if len(self.half_width) != len(self.spacing) or not self.half_width:
            raise ConfigError("half_width and spacing need one entry per dimension", "grid")
        for L, dx in zip(self.half_width, self.spacing):
            if not (L > 0 and dx > 0):
                raise ConfigError("half_width and spacing must be positive", "grid")
            cells = 2.0 * L / dx
            if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
                raise ConfigError(f"2L/dx = {cells:g} is not an integer", "grid.spacing")
            if round(cells) - 1 < MIN_INTERIOR_NODES:
                raise ConfigError(
                    f"at least {MIN_INTERIOR_NODES} interior nodes per dimension "
                    f"required, got {round(cells) - 1}",
                    "grid.spacing",
                )

    @classmethod
    def regular(cls, half_width: float, spacing: float, dimension: int = 1) -> "Grid":
        return cls((float(half_width),) * dimension, (float(spacing),) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.half_width)

    @cached_property
    def shape(self) -> Tuple[int, ...]:
        return tuple(
            int(round(2.0 * L / dx)) + 1 for L, dx in zip(self.half_width, self.spacing)
        )

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axes(self) -> List[np.ndarray]:
        return [
            -L + dx * np.arange(n)
            for L, dx, n in zip(self.half_width, self.spacing, self.shape)
        ]

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, (n_nodes, d), C order over the axes."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def refined(self) -> "Grid":
        """Lattice with half the spacing: the nodes plus all midpoints."""
        return Grid(self.half_width, tuple(dx / 2.0 for dx in self.spacing))

    def with_half_width(self, half_width: Sequence[float]) -> "Grid":
        return Grid(tuple(float(L) for L in half_width), self.spacing)

    def nearest_index(self, x: np.ndarray) -> np.ndarray:
        """Flat index of the nearest node for each row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        flat = np.zeros(x.shape[0], dtype=np.int64)
        for j, (L, dx, n) in enumerate(zip(self.half_width, self.spacing, self.shape)):
            idx = np.clip(np.rint((x[:, j] + L) / dx), 0, n - 1).astype(np.int64)
            flat = flat * n + idx
        return flat

    def core_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Nodes inside the central box scaled by ``fraction``."""
        bound = fraction * np.asarray(self.half_width) + 1e-12
        return np.all(np.abs(self.nodes) <= bound, axis=1)

    def contains_ball(self, ball: "Ball") -> bool:
        center = np.asarray(ball.center)
        return bool(np.all(np.abs(center) + ball.radius <= np.asarray(self.half_width) + 1e-12))

    def to_dict(self) -> Dict:
        return {"half_width": list(self.half_width), "spacing": list(self.spacing)}


@dataclass(frozen=True)
class ThetaGrid:
    """Logarithmic lattice theta_j = kappa * (cap / kappa)^(j / n_steps)."""

    kappa: float
    cap: float
    n_steps: int

    def __post_init__(self):
        if not 0 < self.kappa < self.cap:
            raise ConfigError("need 0 < kappa < theta cap", "grid.kappa_ratio")
        if self.n_steps < 1:
            raise ConfigError("need at least one theta step", "grid.n_theta")

    @classmethod
    def from_cap(cls, cap: float, n_steps: int, kappa_ratio: float = 1e-3) -> "ThetaGrid":
        return cls(kappa=kappa_ratio * cap, cap=cap, n_steps=n_steps)

    @classmethod
    def around(cls, theta: float, n_steps: int, kappa_ratio: float = 1e-3) -> "ThetaGrid":
        """Grid whose node ``n_steps`` sits at ``theta``, with one node beyond it."""
        step = np.log(1.0 / kappa_ratio) / n_steps
        return cls(kappa=kappa_ratio * theta, cap=theta * np.exp(step), n_steps=n_steps + 1)

    @property
    def log_step(self) -> float:
        return float(np.log(self.cap / self.kappa) / self.n_steps)

    @property
    def n_levels(self) -> int:
        return self.n_steps + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = self.kappa * np.exp(self.log_step * np.arange(self.n_levels))
        nodes[0] = self.kappa
        nodes[-1] = self.cap
        return nodes

    def refined(self) -> "ThetaGrid":
        return ThetaGrid(self.kappa, self.cap, 2 * self.n_steps)

    def nearest_level(self, theta: float) -> int:
        """Level used for a running risk parameter; below kappa maps to 0."""
        if theta <= self.kappa:
            return 0
        j = int(round(np.log(theta / self.kappa) / self.log_step))
        return min(max(j, 0), self.n_steps)

    def to_dict(self) -> Dict:
        return {"kappa": self.kappa, "cap": self.cap, "n_steps": self.n_steps}


@dataclass
class ValueField:
    """psi(theta_j, x_i) for one player."""

    values: np.ndarray
    player: int
    alpha: float
    theta_grid: ThetaGrid
    grid: Grid

    def at_theta(self, theta: float) -> np.ndarray:
        return self.values[self.theta_grid.nearest_level(theta)]


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: Tuple[float, ...]
    radius: float

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        dist = np.linalg.norm(x - np.asarray(self.center), axis=1)
        return dist <= self.radius + 1e-12

    def to_dict(self) -> Dict:
        return {"center": list(self.center), "radius": self.radius}

    @classmethod
    def from_dict(cls, data: Dict, dimension: int, key: str) -> "Ball":
        center = _shaped(data.get("center", 0.0), (dimension,), f"{key}.center")
        radius = float(data.get("radius", 0.0))
        if radius < 0:
            raise ConfigError("must be non-negative", f"{key}.radius")
        return cls(tuple(float(c) for c in center), radius)


@dataclass
class WeightFunction:
    """W or h from the built-in families.

    constant: ``value``; cosh: 1 + sum(cosh(gamma_i x_i) - 1);
    quadratic: 1 + x Q x^T.
    """

    kind: WeightKind
    value: float = 1.0
    gamma: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None

    def to_dict(self) -> Dict:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind is WeightKind.CONSTANT:
            data["value"] = self.value
        elif self.kind is WeightKind.COSH:
            data["gamma"] = self.gamma.tolist()
        else:
            data["q"] = self.q.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict, dimension: int, key: str) -> "WeightFunction":
        kind = _enum(WeightKind, data.get("kind"), f"{key}.kind")
        if kind is WeightKind.CONSTANT:
            return cls(kind, value=float(data.get("value", 1.0)))
        if kind is WeightKind.COSH:
            return cls(kind, gamma=_shaped(data.get("gamma"), (dimension,), f"{key}.gamma"))
        raw = np.asarray(data.get("q"), dtype=float)
        if raw.size == dimension:
            q = np.diag(raw.reshape(-1))
        else:
            q = _shaped(raw, (dimension, dimension), f"{key}.q")
        if not np.allclose(q, q.T):
            raise ConfigError("must be symmetric", f"{key}.q")
        return cls(kind, q=q)


@dataclass
class A5Data:
    """Data for the strengthened Lyapunov condition on W^beta."""

    beta: float
    h: WeightFunction
    c_hat: float
    region: Ball


@dataclass
class LyapunovCertificate:
    """(W, delta, c, C) plus optional (beta, h, c_hat, C_hat)."""

    weight: WeightFunction
    delta: float
    c: float
    region: Ball
    a5: Optional[A5Data] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("must be positive", "certificate.delta")
        if not self.c > 0:
            raise ConfigError("must be positive", "certificate.c")
        if self.a5 is not None:
            if not self.a5.beta > 1:
                raise ConfigError("must exceed 1", "certificate.a5.beta")
            if not self.a5.c_hat > 0:
                raise ConfigError("must be positive", "certificate.a5.c_hat")

    def to_dict(self) -> Dict:
        data: Dict[str, Any] = {
            "lyapunov": self.weight.to_dict(),
            "delta": self.delta,
            "c": self.c,
            "set": self.region.to_dict(),
        }
        if self.a5 is not None:
            data["a5"] = {
                "beta": self.a5.beta,
                "h": self.a5.h.to_dict(),
                "c_hat": self.a5.c_hat,
                "set": self.a5.region.to_dict(),
            }
        return data

    @classmethod
    def from_dict(cls, data: Dict, dimension: int) -> "LyapunovCertificate":
        try:
            a5 = None
            if "a5" in data:
                raw = data["a5"]
                a5 = A5Data(
                    beta=float(raw["beta"]),
                    h=WeightFunction.from_dict(raw["h"], dimension, "certificate.a5.h"),
                    c_hat=float(raw["c_hat"]),
                    region=Ball.from_dict(raw["set"], dimension, "certificate.a5.set"),
                )
            return cls(
                weight=WeightFunction.from_dict(
                    data["lyapunov"], dimension, "certificate.lyapunov"
                ),
                delta=float(data["delta"]),
                c=float(data["c"]),
                region=Ball.from_dict(data["set"], dimension, "certificate.set"),
                a5=a5,
            )
        except KeyError as e:
            raise ConfigError("missing", f"certificate.{e.args[0]}")


@dataclass
class C0Set:
    """Nodes where W(x) > 1 + c / delta."""

    mask: np.ndarray
    threshold: float

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())


@dataclass
class CheckReport:
    """Outcome of one assumption or invariant check."""

    name: str
    holds: bool
    margin: float
    worst_node: Optional[Tuple[float, ...]] = None
    worst_pair: Optional[Tuple[int, int]] = None
    details: Dict[str, Any] = field(default_factory=dict)
    messages: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "holds": self.holds,
            "margin": self.margin,
            "worst_node": list(self.worst_node) if self.worst_node else None,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "details": self.details,
            "messages": self.messages,
        }


@dataclass
class NashReport:
    """Result of the discounted fictitious-play iteration."""

    strategies: Tuple[StrategyField, StrategyField]
    values: Tuple[ValueField, ValueField]
    iterations: int
    change: float
    residuals: Tuple[float, float]
    converged: bool
    strat_tol: float
    resid_tol: float
    history: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "iterations": self.iterations,
            "change": self.change,
            "strat_tol": self.strat_tol,
            "residuals": list(self.residuals),
            "resid_tol": self.resid_tol,
            "converged": self.converged,
            "history": self.history,
        }


@dataclass
class ErgodicSolution:
    """Principal eigenpair (theta * rho, psi) with psi(anchor) = 1."""

    rho: float
    psi: np.ndarray
    anchor: int
    player: int
    theta: float
    eigen_residual: float = 0.0
    selector_gap: float = 0.0
    outer_iterations: int = 0
    cycled: bool = False

    def to_dict(self) -> Dict:
        return {
            "player": self.player,
            "theta": self.theta,
            "rho": self.rho,
            "theta_rho": self.theta * self.rho,
            "anchor": self.anchor,
            "eigen_residual": self.eigen_residual,
            "selector_gap": self.selector_gap,
            "outer_iterations": self.outer_iterations,
            "cycled": self.cycled,
        }


@dataclass
class ErgodicNashReport:
    """Result of the ergodic fictitious-play iteration."""

    strategies: Tuple[StrategyField, StrategyField]
    solutions: Tuple[ErgodicSolution, ErgodicSolution]
    iterations: int
    change: float
    residuals: Tuple[float, float]
    converged: bool
    strat_tol: float
    resid_tol: float
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def rho(self) -> Tuple[float, float]:
        return (self.solutions[0].rho, self.solutions[1].rho)

    def to_dict(self) -> Dict:
        return {
            "rho": list(self.rho),
            "iterations": self.iterations,
            "change": self.change,
            "strat_tol": self.strat_tol,
            "residuals": list(self.residuals),
            "resid_tol": self.resid_tol,
            "converged": self.converged,
            "solutions": [s.to_dict() for s in self.solutions],
            "history": self.history,
        }


@dataclass
class DeviationReport:
    """Worst relative improvement any listed deviation achieves."""

    worst_violation: float
    per_player: Tuple[float, float]
    n_deviations: int
    dev_tol: float
    worst_case: str = ""

    @property
    def holds(self) -> bool:
        return self.worst_violation <= self.dev_tol

    def to_dict(self) -> Dict:
        return {
            "worst_violation": self.worst_violation,
            "per_player": list(self.per_player),
            "n_deviations": self.n_deviations,
            "dev_tol": self.dev_tol,
            "holds": self.holds,
            "worst_case": self.worst_case,
        }


@dataclass
class VanishingDiscountReport:
    """eta_alpha sequence, its extrapolated limit and the eigen-solver reference."""

    alphas: List[float]
    etas: List[float]
    limit: float
    rho: float
    theta: float
    rel_error_theta_rho: float
    rel_error_rho: float
    normalization: str
    monotone: bool
    warnings: List[str] = field(default_factory=list)
    etas_forward: List[float] = field(default_factory=list)
    limit_forward: float = float("nan")

    def to_dict(self) -> Dict:
        return {
            "alphas": self.alphas,
            "etas": self.etas,
            "etas_forward": self.etas_forward,
            "limit": self.limit,
            "limit_forward": self.limit_forward,
            "rho": self.rho,
            "theta_rho": self.theta * self.rho,
            "rel_error_theta_rho": self.rel_error_theta_rho,
            "rel_error_rho": self.rel_error_rho,
            "normalization": self.normalization,
            "monotone": self.monotone,
            "warnings": self.warnings,
        }


@dataclass
class SimConfig:
    """Euler-Maruyama settings."""

    dt: float
    horizon: float
    n_paths: int
    seed: int
    mixing: MixingMode = MixingMode.SAMPLE
    tail_tol: float = 1e-4

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("must be positive", "simulation.dt")
        if self.horizon < 0:
            raise ConfigError("must be non-negative", "simulation.horizon")
        if self.n_paths < 100:
            raise ConfigError("need at least 100 paths", "simulation.paths")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must fit in 64 bits", "simulation.seed")
        if not self.tail_tol > 0:
            raise ConfigError("must be positive", "simulation.tail_tol")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def check_against(self, grid: Grid) -> None:
        """Reject steps coarser than the spatial lattice."""
        if self.dt > min(grid.spacing) + 1e-15:
            raise ConfigError(
                f"dt = {self.dt:g} exceeds the grid spacing {min(grid.spacing):g}",
                "simulation.dt",
            )


@dataclass
class CostEstimate:
    """Monte-Carlo estimate with its uncertainty."""

    estimate: float
    stderr: float
    n_paths: int
    tag: EstimatorTag
    lower: float
    upper: float
    horizon: float
    warnings: List[str] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {
            "tag": self.tag.value,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "lower": self.lower,
            "upper": self.upper,
            "horizon": self.horizon,
            "warnings": self.warnings,
            "extras": self.extras,
        }


@dataclass
class CrosscheckRow:
    """One cell of the pass/fail matrix."""

    name: str
    reference: float
    candidate: float
    difference: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "reference": self.reference,
            "candidate": self.candidate,
            "difference": self.difference,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class RunResult:
    """Result of one CLI subcommand."""

    success: bool
    command: str
    message: str
    exit_code: int = 0
    artifacts: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
