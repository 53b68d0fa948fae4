"""Exception hierarchy shared across the package.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class DebiasForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(DebiasForgeError):
    """Invalid configuration value, key, or combination."""


class DataError(DebiasForgeError):
    """Malformed or inconsistent data (datasets, weights, metrics)."""


class SchemaError(DataError):
    """A file parsed but its shape/schema does not match expectations."""


class NumericError(DebiasForgeError):
    """Non-finite values encountered during computation."""


class DegenerateShallowError(DebiasForgeError):
    """Shallow model stuck at chance accuracy (no passing grid cell)."""
