"""Exception hierarchy shared by the numerical kernels, suites and CLI."""

from __future__ import annotations

# ---------------------------------------------------------------------------
# Base
# ---------------------------------------------------------------------------


class LoopIntError(Exception):
    """Base exception for loopint errors."""

    exit_code: int = 1


# ---------------------------------------------------------------------------
# Input and configuration errors
# ---------------------------------------------------------------------------


class ConfigError(LoopIntError):
    """Raised when an experiment config or form expression is invalid."""

    exit_code = 2


class DimensionMismatchError(LoopIntError, ValueError):
    """Raised when operands live over different dimensions."""


class NonHomogeneousError(LoopIntError, ValueError):
    """Raised when a parity is requested from a mixed-parity element."""


class GridError(LoopIntError, ValueError):
    """Raised for degenerate time grids or shifts that leave the grid."""


class CoincidentTimesError(LoopIntError, ValueError):
    """Raised when point masses share a time and were not decomposed first."""


# ---------------------------------------------------------------------------
# Numerical budget errors
# ---------------------------------------------------------------------------


class BudgetExceededError(LoopIntError):
    """Raised when a factorial, truncation or step budget is exceeded."""

    def __init__(self, message: str, bound: float | None = None) -> None:
        super().__init__(message)
        self.bound = bound


class NumericalFailure(LoopIntError):
    """Raised when an integrand produced a NaN."""

    exit_code = 3


class ToleranceFailure(LoopIntError):
    """Raised when a suite comparison misses its tolerance."""

    exit_code = 3


# ---------------------------------------------------------------------------
# Oracle errors
# ---------------------------------------------------------------------------


class UnsupportedBackendError(LoopIntError):
    """Raised when an operation is not available for the given backend."""

    exit_code = 4


class SpectralCutoffError(LoopIntError):
    """Raised when the Fourier truncation tail exceeds the tolerance."""

    exit_code = 4

    def __init__(self, message: str, tail: float = 0.0) -> None:
        super().__init__(message)
        self.tail = tail


class TrackingAmbiguityError(LoopIntError):
    """Raised when eigenvalue tracking cannot resolve a crossing."""

    exit_code = 4

    def __init__(self, message: str, s: float = 0.0, gap: float = 0.0) -> None:
        super().__init__(message)
        self.s = s
        self.gap = gap
