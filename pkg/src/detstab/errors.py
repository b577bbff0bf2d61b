"""Shared exception types for the solver pipeline."""

from __future__ import annotations

from .model import InvalidParameterError, BeyondCJError

__all__ = [
    "InvalidParameterError",
    "BeyondCJError",
    "NumericalError",
    "NoProfileError",
    "SlowDecayError",
    "DegenerateLinearizationError",
    "FrameDegeneracyError",
    "StiffnessError",
    "NearZeroOnContourError",
    "UncertifiedWindingError",
    "FrontierNotBracketedError",
]


class NumericalError(RuntimeError):
    """Base class for numerical failures (CLI exit code 3)."""


class NoProfileError(NumericalError):
    """Connection solve did not converge.

    Carries the last iterate and a bench diagnostic: a flat stretch of u at
    the weak-detonation height signals loss of strong-detonation existence.
    """

    def __init__(self, message, last_iterate=None, bench=False, bench_interval=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.bench = bench
        self.bench_interval = bench_interval


class SlowDecayError(NumericalError):
    """Domain-extension cap hit before the endpoint tolerance was met."""


class DegenerateLinearizationError(NumericalError):
    """End-state linearization lacks the expected hyperbolic splitting (CJ point)."""


class FrameDegeneracyError(NumericalError):
    """Spectral gap of a limit matrix collapsed along the contour."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class StiffnessError(NumericalError):
    """Evans integrator step size underflowed; carries the x location."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class NearZeroOnContourError(NumericalError):
    """|E| fell below threshold at a contour node; perturb the radius and retry."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class UncertifiedWindingError(NumericalError):
    """Argument-step refinement exhausted without certification (CLI exit code 4)."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class FrontierNotBracketedError(NumericalError):
    """Bench-frontier bisection could not bracket a classification change."""
