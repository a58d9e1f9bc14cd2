"""Exception types raised across the package.

The CLI maps each class to a distinct exit code.
"""


class CovLDAError(Exception):
    """Base class for package errors."""


class ConfigError(CovLDAError, ValueError):
    """Invalid run configuration or hyperparameters."""


class DataError(CovLDAError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(CovLDAError, ArithmeticError):
    """A density or sampler produced a non-finite or degenerate value."""


class ConstraintError(NumericalError):
    """Latent counts no longer reproduce the observed abundance matrix."""
