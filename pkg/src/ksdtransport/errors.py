"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` and
``UnsupportedCapability`` exit with 2, ``NumericFailure`` (and subclasses)
exit with 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class UnsupportedCapability(ConfigError):
    """A map or sampler was asked for something it cannot provide."""


class NumericFailure(ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class MonotonicityError(NumericFailure):
    """A triangular map lost monotonicity where a log-determinant was needed."""


class HmcDiagnosticError(NumericFailure):
    """HMC warmup failed to produce a usable chain."""


class ResourceLimitError(RuntimeError):
    """A problem size exceeds a configured cap."""
