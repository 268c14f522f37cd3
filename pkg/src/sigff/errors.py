"""Exception hierarchy shared by every module.

Each class carries the process exit code the command line maps it to.
"""


class SigffError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(SigffError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ConfigurationError(SigffError, ValueError):
    """Inconsistent parameters, failed profile validation or bad config files."""

    exit_code = 2


class PreconditionError(ConfigurationError):
    """Hypotheses of a comparison check are not met."""


class ResourceError(SigffError, MemoryError):
    """A problem size exceeds a configured cap."""

    exit_code = 3


class NumericError(SigffError, ArithmeticError):
    """A factorization or linear solve failed."""


class AccuracyError(NumericError):
    """An iterative or quadrature scheme did not reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SamplingError(SigffError, RuntimeError):
    """A rejection sampler ran out of proposals."""

    def __init__(self, message, acceptance_rate=None):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class StatisticalError(SigffError, ValueError):
    """Too few or degenerate samples for an estimator."""


class FieldFormatError(SigffError, ValueError):
    """Base class for binary field dump parse errors."""

    exit_code = 2


class MagicError(FieldFormatError):
    pass


class VersionError(FieldFormatError):
    pass


class LengthError(FieldFormatError):
    def __init__(self, expected, found):
        super().__init__(f"expected {expected} bytes, found {found}")
        self.expected = expected
        self.found = found


class CalibrationWarning(UserWarning):
    """A calibration ran but its diagnostics look off (for example, no plateau)."""
