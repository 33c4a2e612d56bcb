"""Common contract for parametric transport maps."""
from __future__ import annotations

import numpy as np

from ..errors import NumericFailure, UnsupportedCapability


def as_batch(x, dim):
    """Promote a single point to a batch of one; returns (batch, was_single)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != dim:
        raise ValueError(f"expected inputs of dimension {dim}, got {x.shape[-1]}")
    return x, single


class TransportMap:
    """A map ``T(theta, x)`` from R^p to R^d with a flat parameter vector.

    ``forward`` and ``log_det_jacobian`` accept a single point or a batch
    ``(n, p)``. ``vjp_params(theta, x, v)`` returns ``sum_i v_i^T dT(x_i)/dtheta``
    and ``grad_params_log_det(theta, x, w)`` returns
    ``sum_i w_i d log|det dT(x_i)/dx| / dtheta``.
    """

    kind = "abstract"
    input_dim: int
    output_dim: int
    param_count: int
    has_log_det = False
    supports_identity = False

    def forward(self, theta, x):
        raise NotImplementedError

    def vjp_params(self, theta, x, v):
        raise NotImplementedError

    def log_det_jacobian(self, theta, x):
        raise UnsupportedCapability(f"{self.kind} map has no log-determinant (not a diffeomorphism)")

    def grad_params_log_det(self, theta, x, w=None):
        raise UnsupportedCapability(f"{self.kind} map has no log-determinant (not a diffeomorphism)")

    def identity_params(self, rng=None):
        raise UnsupportedCapability(f"{self.kind} map has no identity parameterisation")

    def random_params(self, rng):
        raise NotImplementedError

    def topology(self) -> dict:
        raise NotImplementedError

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_count,):
            raise ValueError(f"{self.kind} expects {self.param_count} parameters, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise NumericFailure("non-finite parameters")
        return theta


def fan_in_uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)
