"""Exception types raised across the package."""


class SohError(ValueError):
    """Base class for all domain errors."""


class TraceParseError(SohError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceValidationError(SohError):
    pass


class VoltageRangeError(TraceValidationError):
    pass


class CoverageError(SohError):
    pass


class FitError(SohError):
    """Raised when a fit does not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NotFullyChargedError(SohError):
    pass


class TooShortError(SohError):
    pass


class NoEstimateError(SohError):
    pass


class SchemaError(SohError):
    pass
