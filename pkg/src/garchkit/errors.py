"""Exception types shared across the toolkit."""


class GarchkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(GarchkitError):
    """Malformed input data: bad CSV cells, unalignable calendars, bad series."""


class ModelError(GarchkitError):
    """Invalid model specification or parameter values."""


class EstimationError(GarchkitError):
    """Fitting could not proceed: rank-deficient design, no usable start, etc."""


class ConfigError(GarchkitError):
    """Invalid run configuration (CLI or config file)."""
