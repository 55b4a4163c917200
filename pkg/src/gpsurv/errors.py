"""Exception hierarchy shared across the package."""


class GpsurvError(Exception):
    """Base class for all gpsurv errors."""


class ValidationError(GpsurvError, ValueError):
    """Bad user input: domain violations, malformed files, shape mismatches."""


class WrongLikelihoodError(ValidationError):
    """Dataset record types do not match the requested likelihood."""


class IllConditionedKernelError(GpsurvError):
    """Gram matrix could not be factorised even at the maximum jitter level."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class NonConvergenceError(GpsurvError):
    """An optimiser failed to reach its tolerance."""


class NumericError(GpsurvError):
    """A numerical operation produced an unusable result."""
