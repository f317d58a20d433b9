"""Exception hierarchy shared by all heatplan modules."""


class HeatplanError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(HeatplanError):
    """Invalid or inconsistent configuration (missing column, bad key, bad bounds)."""


class IngestionError(HeatplanError):
    """A data file could not be parsed into a valid series."""


class CoverageError(HeatplanError):
    """A series does not cover the requested time window."""


class ResamplingError(HeatplanError):
    """Resampling request that cannot be honored (downsampling, too few points)."""


class NumericalBlowupError(HeatplanError):
    """Simulation state became non-finite."""


class DegenerateDataError(HeatplanError):
    """An operation's denominator or range is too close to zero to be meaningful."""


class InsufficientHistoryError(HeatplanError):
    """Calibration history shorter than the configured window."""
