"""Measure transport by kernel Stein discrepancy minimisation.

A parametric map pushes a simple reference distribution forward; its
parameters are fitted by stochastic gradient descent on the squared KSD
between the pushforward and an unnormalised target. Quality is measured by
exact Wasserstein-1 distance against target samples or an HMC gold standard.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, HmcDiagnosticError, MonotonicityError, NumericFailure,
                     ResourceLimitError, UnsupportedCapability)
from .kernel import KernelParams

__all__ = [
    "ConfigError", "HmcDiagnosticError", "KernelParams", "MonotonicityError",
    "NumericFailure", "ResourceLimitError", "UnsupportedCapability", "__version__",
]
