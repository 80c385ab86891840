"""Exception hierarchy.

Each family maps to one CLI exit code: configuration problems exit 2,
data problems exit 3 and estimation failures exit 4.
"""


class MfqVarError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(MfqVarError, ValueError):
    pass


class DataError(MfqVarError, ValueError):
    pass


class AlignmentError(DataError):
    """Daily or monthly series are not ordered / contiguous."""


class CoverageError(DataError):
    """Monthly history does not cover the daily sample."""


class InsufficientHistoryError(DataError):
    """Not enough lagged observations for the requested position."""


class EstimationError(MfqVarError, RuntimeError):
    pass


class SingularDesignError(EstimationError):
    pass


class ZeroSparsityError(EstimationError):
    pass


class IncompatibleFitsError(EstimationError):
    pass


class RescaleError(EstimationError):
    pass
