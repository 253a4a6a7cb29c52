"""Exception and warning types raised across the package."""


class QuasiflowError(Exception):
    """Base class for all package errors."""


# geometry / hanzawa
class SelfIntersection(QuasiflowError):
    pass


class OutsideContainer(QuasiflowError):
    pass


class NotConverged(QuasiflowError):
    pass


class DegenerateCurve(QuasiflowError):
    pass


class TubeViolation(QuasiflowError):
    pass


class UnsupportedBase(QuasiflowError):
    pass


# elliptic
class IllConditioned(QuasiflowError):
    pass


# stepper
class GridMismatch(QuasiflowError):
    pass


class ParameterOutOfRange(QuasiflowError, ValueError):
    pass


class NoContraction(QuasiflowError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConstraintViolation(QuasiflowError):
    pass


class FiniteTimeBreakdown(QuasiflowError):
    """Raised when a continuation cannot reach its horizon.

    ``t_last`` is the last time at which a valid state exists, ``partial``
    holds whatever was computed up to that time and ``cause`` names the
    reason (``"NoContraction"``, ``"NormBlowup"``, ...).
    """

    def __init__(self, message, t_last, cause, partial=None):
        super().__init__(message)
        self.t_last = t_last
        self.cause = cause
        self.partial = partial


# models / dynamics
class NonPositiveCoefficient(QuasiflowError):
    pass


class NotAnEquilibrium(QuasiflowError):
    pass


class NonPositiveSeries(QuasiflowError, ValueError):
    pass


class BallConditionBreach(QuasiflowError):
    pass


class NormBlowup(QuasiflowError):
    pass


# cli
class ConfigError(QuasiflowError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ResolutionWarning(UserWarning):
    """Fourier tail of a field is too heavy for the node count."""
