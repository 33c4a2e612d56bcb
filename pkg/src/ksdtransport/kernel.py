"""Inverse multi-quadric kernel and its closed-form derivatives.

All functions broadcast over leading axes: ``x`` and ``y`` have shape
``(..., d)`` and results carry the broadcast leading shape. Writing
``r = x - y`` and ``s = c**2 + |r|**2 / ell**2`` the kernel is ``s**beta``;
every derivative below is a polynomial in ``r`` times a power of ``s``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Mutation hook for the self-check suite; never set outside tests.
_FAULT = os.environ.get("KSDTRANSPORT_FAULT", "")


@dataclass(frozen=True)
class KernelParams:
    c: float = 1.0
    lengthscale: float = 0.1
    beta: float = -0.5

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not -1.0 < self.beta < 0.0:
            raise ValueError(f"beta must lie in (-1, 0), got {self.beta}")


def _diff(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    return x - y


def _s(params: KernelParams, r):
    return params.c**2 + np.sum(r * r, axis=-1) / params.lengthscale**2


def imq_eval(params: KernelParams, x, y):
    """k(x, y) = (c^2 + |(x - y)/ell|^2)^beta."""
    return _s(params, _diff(x, y)) ** params.beta


def imq_grad_x(params: KernelParams, x, y):
    """Gradient of k in its first argument."""
    r = _diff(x, y)
    b, l2 = params.beta, params.lengthscale**2
    g = (2.0 * b / l2) * _s(params, r)[..., None] ** (b - 1.0) * r
    return -g if _FAULT == "imq_grad_sign" else g


def imq_grad_y(params: KernelParams, x, y):
    """Gradient of k in its second argument (equals ``-imq_grad_x``)."""
    return -imq_grad_x(params, x, y)


def imq_hess_xy(params: KernelParams, x, y):
    """Mixed second derivatives, ``M[..., i, j] = d^2 k / dx_i dy_j``."""
    r = _diff(x, y)
    t = imq_terms(params, r)
    d = r.shape[-1]
    return (t.m_diag[..., None, None] * np.eye(d)
            + t.m_outer[..., None, None] * r[..., :, None] * r[..., None, :])


def imq_hess_yy(params: KernelParams, x, y):
    """Second derivatives in the second argument; the negative of ``imq_hess_xy``."""
    return -imq_hess_xy(params, x, y)


def imq_cross_div(params: KernelParams, x, y):
    """Trace of ``imq_hess_xy`` without forming the matrix."""
    return imq_terms(params, _diff(x, y)).cross_div


def imq_grad_y_cross_div(params: KernelParams, x, y):
    """Gradient in ``y`` of ``imq_cross_div``."""
    return -imq_terms(params, _diff(x, y)).grad_x_cross_div


class ImqTerms(NamedTuple):
    """Kernel quantities at displacement ``r = x - y``.

    ``M = m_diag * I + m_outer * r r^T`` is the mixed Hessian d^2k/dx dy,
    so ``M @ v = m_diag * v + m_outer * r (r . v)``.
    """

    s: np.ndarray
    k: np.ndarray
    grad_x: np.ndarray
    m_diag: np.ndarray
    m_outer: np.ndarray
    cross_div: np.ndarray
    grad_x_cross_div: np.ndarray

    def mixed_hess_apply(self, r, v):
        return self.m_diag[..., None] * v + (self.m_outer * np.sum(r * v, axis=-1))[..., None] * r


class ImqRadial(NamedTuple):
    """Kernel derivatives as scalar coefficients of the displacement ``r``.

    ``grad_x k = grad_coef * r``, ``M = m_diag * I + m_outer * r r^T`` and
    ``grad_x tr(M) = cross_div_grad_coef * r``.
    """

    k: np.ndarray
    grad_coef: np.ndarray
    m_diag: np.ndarray
    m_outer: np.ndarray
    cross_div: np.ndarray
    cross_div_grad_coef: np.ndarray


def imq_radial(params: KernelParams, s, d: int) -> ImqRadial:
    """Radial coefficients from ``s = c^2 + |r|^2 / ell^2`` in dimension ``d``."""
    c2, b, l2 = params.c**2, params.beta, params.lengthscale**2
    if b == -0.5:
        s_b1 = 1.0 / (s * np.sqrt(s))
    else:
        s_b1 = s ** (b - 1.0)
    inv_s = 1.0 / s
    s_b2 = s_b1 * inv_s
    a = 2.0 * b / l2
    k = s_b1 * s
    grad_coef = a * s_b1
    if _FAULT == "imq_grad_sign":
        grad_coef = -grad_coef
    m_diag = -a * s_b1
    m_outer = (-a * (b - 1.0) * (2.0 / l2)) * s_b2
    # trace(M) as g(s) = -a (d + 2b - 2) s^(b-1) + 2 a (b-1) c^2 s^(b-2)
    cross_div = (-a * (d + 2.0 * b - 2.0)) * s_b1 + (2.0 * a * (b - 1.0) * c2) * s_b2
    dg_ds = ((-a * (d + 2.0 * b - 2.0) * (b - 1.0)) * s_b2
             + (2.0 * a * (b - 1.0) * (b - 2.0) * c2) * s_b2 * inv_s)
    return ImqRadial(k, grad_coef, m_diag, m_outer, cross_div, dg_ds * (2.0 / l2))


def imq_terms(params: KernelParams, r) -> ImqTerms:
    """All kernel derivatives needed by the Stein kernel, from one displacement array."""
    r = np.asarray(r, dtype=np.float64)
    s = _s(params, r)
    t = imq_radial(params, s, r.shape[-1])
    return ImqTerms(s, t.k, t.grad_coef[..., None] * r, t.m_diag, t.m_outer, t.cross_div,
                    t.cross_div_grad_coef[..., None] * r)
