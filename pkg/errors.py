"""Exception hierarchy for the risk-sensitive game solver.

Every error carries the process exit status the CLI reports for it.
"""

from typing import Optional


class GameSolverError(Exception):
    """Base class for solver errors."""

    exit_code = 3


class ConfigError(GameSolverError, ValueError):
    """Invalid run or game configuration."""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class InvalidMixedActionError(GameSolverError, ValueError):
    """Weights that are not a probability vector."""


class DomainTooSmallError(GameSolverError, ValueError):
    """A certificate set does not fit inside the truncated domain."""


class MonotonicityError(GameSolverError):
    """The requested discretization cannot produce a monotone stencil."""


class StabilityBoundError(GameSolverError, ValueError):
    """Time step too large for P = I + dt*Q to stay non-negative."""

    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(
            f"time step {dt:g} exceeds the stability bound {bound:.6g} "
            f"(1 / max |diagonal|)"
        )


class NumericalFailure(GameSolverError):
    """A solver could not produce a trustworthy result."""


class PolicyIterationError(NumericalFailure):
    """Howard iteration did not settle within the iteration cap."""

    def __init__(self, node: int, level: int, iterations: int):
        self.node = node
        self.level = level
        self.iterations = iterations
        super().__init__(
            f"policy iteration did not stabilize at theta level {level} "
            f"(first unsettled node {node}) after {iterations} iterations"
        )


class InvariantBreachError(NumericalFailure):
    """Computed values left their theoretical bounds."""


class PowerIterationStagnation(NumericalFailure):
    """Inverse power iteration did not converge."""

    def __init__(self, message: str, gap_estimate: float):
        self.gap_estimate = gap_estimate
        super().__init__(f"{message} (estimated eigenvalue gap {gap_estimate:.3e})")


class ReducibleChainError(NumericalFailure, ValueError):
    """The mixed chain has more than one communicating class."""
