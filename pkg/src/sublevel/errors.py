"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SublevelError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(SublevelError, ValueError):
    """Invalid parameters handed to a constructor."""


class EvaluationError(SublevelError):
    """A functional returned a non-finite value."""

    def __init__(self, message, point=None, label=None):
        super().__init__(message)
        self.point = point
        self.label = label


class AlphaBetaUndetermined(SublevelError):
    """The minimizer oracle could not decide whether M_a / M_b are empty."""


class CoercivityError(SublevelError):
    """The penalized objective kept decreasing toward the search box boundary."""


class OutOfRangeError(SublevelError):
    """The requested level r lies outside the open interval (alpha, beta)."""


class LevelJumpError(SublevelError):
    """Bisection collapsed onto a multiplier where psi(y_lambda) jumps over r."""

    def __init__(self, message, lo, hi, psi_lo, psi_hi):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.psi_lo = psi_lo
        self.psi_hi = psi_hi

    @property
    def location(self):
        return 0.5 * (self.lo + self.hi)


class LevelSetNotFound(SublevelError):
    """No point of psi^{-1}(r) was found in the scanned region."""


class InfeasibleError(SublevelError):
    """No feasible step function was found for the sub-level constraint."""


class ConsistencyError(SublevelError):
    """Two independent routes to the same number disagree."""


class NoPositiveSolution(SublevelError):
    """Shooting found no sign change in the slope bracket."""


class ConfigError(SublevelError):
    """Malformed suite configuration or report file."""
