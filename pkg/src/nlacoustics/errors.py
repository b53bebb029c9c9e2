"""Exception types shared across the package."""


class AcousticsError(Exception):
    """Base class for all package errors."""


class ParamError(AcousticsError):
    """A model parameter violates its admissible range."""

    def __init__(self, name: str, message: str = ""):
        self.name = name
        super().__init__(message or f"invalid parameter: {name}")


class GridMismatch(AcousticsError):
    """Fields that must share a grid do not."""


class NonzeroMean(AcousticsError):
    """Periodic antiderivative requested for data with nonzero mean."""


class NonFinite(AcousticsError):
    """A NaN or Inf appeared; carries the last good evolution coordinate."""

    def __init__(self, message: str, last_good: float | None = None):
        self.last_good = last_good
        super().__init__(message)


class CFLViolation(AcousticsError):
    """Requested time step exceeds the stability bound."""


class NonPositiveDensity(AcousticsError):
    """Density lost positivity; carries the time at which it happened."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        super().__init__(message)


class DomainExceeded(AcousticsError):
    """A reconstruction point maps outside the solved profile domain."""


class EmptyCone(AcousticsError):
    """The comparison cone has shrunk to nothing at the requested time."""


class InsufficientSnapshots(AcousticsError):
    """Too few snapshots for the requested time-differencing stencil."""


class DegenerateFit(AcousticsError):
    """Scaling fit impossible (no variance in the abscissa)."""


class ParseError(AcousticsError):
    """Configuration file could not be parsed; names the offending key."""


class ValidationError(AcousticsError):
    """Configuration parsed but a field failed validation."""


class NonMonotoneErrors(UserWarning):
    """Convergence-study differences did not decrease monotonically."""
