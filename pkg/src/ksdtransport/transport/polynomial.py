"""Triangular polynomial maps in the monomial basis.

Component ``i`` is a linear combination of monomials in ``x_1 .. x_i`` of
total degree at most ``degree``. Parameters are stored component by
component, multi-indices in ``itertools.product`` order.
"""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import MonotonicityError
from .base import TransportMap, as_batch


def _multi_indices(nvars, degree):
    return [j for j in itertools.product(range(degree + 1), repeat=nvars) if sum(j) <= degree]


class PolynomialMap(TransportMap):
    kind = "polynomial"
    has_log_det = True
    supports_identity = True

    def __init__(self, dim=2, degree=3):
        self.dim = self.input_dim = self.output_dim = int(dim)
        self.degree = int(degree)
        self.indices = [np.array(_multi_indices(i + 1, self.degree)) for i in range(self.dim)]
        self.offsets = np.cumsum([0] + [len(j) for j in self.indices])
        self.param_count = int(self.offsets[-1])

    def topology(self):
        return {"kind": self.kind, "dim": self.dim, "degree": self.degree}

    def _powers(self, x):
        # powers[n, k, e] = x[n, k] ** e
        return x[:, :, None] ** np.arange(self.degree + 1)

    def basis(self, x, i):
        """Monomials of component ``i`` evaluated at a batch, shape ``(n, K_i)``."""
        pw = self._powers(x)
        idx = self.indices[i]
        out = np.ones((len(x), len(idx)))
        for k in range(i + 1):
            out *= pw[:, k, idx[:, k]]
        return out

    def diag_basis(self, x, i):
        """Derivatives of the component-``i`` monomials with respect to ``x_i``."""
        pw = self._powers(x)
        idx = self.indices[i]
        out = np.ones((len(x), len(idx)))
        for k in range(i + 1):
            if k == i:
                e = idx[:, k]
                out *= e * pw[:, k, np.maximum(e - 1, 0)]
            else:
                out *= pw[:, k, idx[:, k]]
        return out

    def _coefs(self, theta, i):
        return theta[self.offsets[i]:self.offsets[i + 1]]

    def forward(self, theta, x):
        theta = self.check_theta(theta)
        x, single = as_batch(x, self.dim)
        y = np.column_stack([self.basis(x, i) @ self._coefs(theta, i) for i in range(self.dim)])
        return y[0] if single else y

    def vjp_params(self, theta, x, v):
        self.check_theta(theta)
        x, _ = as_batch(x, self.dim)
        v = np.asarray(v, dtype=np.float64).reshape(len(x), self.dim)
        return np.concatenate([v[:, i] @ self.basis(x, i) for i in range(self.dim)])

    def _diag(self, theta, x):
        theta = self.check_theta(theta)
        diag = np.column_stack([self.diag_basis(x, i) @ self._coefs(theta, i)
                                for i in range(self.dim)])
        if np.any(diag <= 0.0):
            raise MonotonicityError("polynomial map has a nonpositive diagonal partial derivative")
        return diag

    def log_det_jacobian(self, theta, x):
        x, single = as_batch(x, self.dim)
        ld = np.log(self._diag(theta, x)).sum(axis=-1)
        return ld[0] if single else ld

    def grad_params_log_det(self, theta, x, w=None):
        x, _ = as_batch(x, self.dim)
        w = np.ones(len(x)) if w is None else np.atleast_1d(np.asarray(w, dtype=np.float64))
        diag = self._diag(theta, x)
        return np.concatenate([(w / diag[:, i]) @ self.diag_basis(x, i) for i in range(self.dim)])

    def identity_params(self, rng=None):
        theta = np.zeros(self.param_count)
        for i, idx in enumerate(self.indices):
            unit = np.zeros(i + 1, dtype=int)
            unit[i] = 1
            pos = int(np.flatnonzero((idx == unit).all(axis=1))[0])
            theta[self.offsets[i] + pos] = 1.0
        return theta

    def random_params(self, rng):
        return self.identity_params() + rng.uniform(-0.1, 0.1, self.param_count)
