"""Stein kernel, squared-KSD estimators and their parameter gradients.

With ``r = y - y'``, scores ``s, s'`` and the IMQ kernel ``k``,

    u_p(y, y') = k s.s' + (s' - s).grad_y k + tr(d^2 k / dy dy')

and the first-argument gradient used for back-propagation is

    du/dy = J(y) (k s' - grad_y k) + (s.s') grad_y k - M (s' - s) + grad_y tr(M)

where ``J`` is the score Jacobian and ``M`` the mixed kernel Hessian. By
symmetry of ``u_p`` the gradient of a double sum with respect to ``y_i`` is
twice the row sum of ``du/dy(y_i, y_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure
from .kernel import KernelParams, imq_radial

_CHUNK = 256


@dataclass(frozen=True)
class KsdEstimate:
    value: float
    statistic_kind: str
    n: int

    @property
    def discrepancy(self):
        """Square root of the clipped squared-KSD estimate."""
        return float(np.sqrt(max(self.value, 0.0)))


@dataclass(frozen=True)
class GradEstimate:
    grad: np.ndarray
    n: int


def _points(target, y):
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[-1] != target.dim:
        raise ValueError(f"points have dimension {y.shape[-1]}, target has {target.dim}")
    return y


def _raise_nonfinite(mat, what):
    i, j = np.argwhere(~np.isfinite(mat))[0][:2]
    raise NumericFailure(f"non-finite {what} at pair ({i}, {j})")


def _pairwise(kparams: KernelParams, yi, yj, si, sj):
    """Radial coefficients and the per-pair scalars ``s_i.s_j`` and ``r.(s_j - s_i)``."""
    d = yi.shape[1]
    sq = np.zeros((len(yi), len(yj)))
    q = np.zeros_like(sq)
    for c in range(d):
        rc = yi[:, c, None] - yj[None, :, c]
        sq += rc * rc
        q += rc * (sj[None, :, c] - si[:, c, None])
    t = imq_radial(kparams, kparams.c**2 + sq / kparams.lengthscale**2, d)
    return t, si @ sj.T, q


def _u_values(t, ss, q):
    return t.k * ss + t.grad_coef * q + t.cross_div


def stein_matrix(kparams: KernelParams, y, scores):
    """Pairwise ``u_p(y_i, y_j)`` for given points and their scores."""
    n = len(y)
    out = np.empty((n, n))
    for a in range(0, n, _CHUNK):
        t, ss, q = _pairwise(kparams, y[a:a + _CHUNK], y, scores[a:a + _CHUNK], scores)
        out[a:a + _CHUNK] = _u_values(t, ss, q)
    if not np.all(np.isfinite(out)):
        _raise_nonfinite(out, "Stein kernel value")
    return out


def _weighted_displacement_sum(w, y):
    # sum_j w_ij (y_i - y_j)
    return y * w.sum(axis=1)[:, None] - w @ y


def _stein_core(kparams: KernelParams, y, scores, jacobians, include_diagonal):
    """Stein matrix and row sums ``G_i = sum_j du/dy(y_i, y_j)``."""
    n = len(y)
    t, ss, q = _pairwise(kparams, y, y, scores, scores)
    u = _u_values(t, ss, q)
    if not np.all(np.isfinite(u)):
        _raise_nonfinite(u, "Stein kernel value")
    mask = np.ones((n, n)) if include_diagonal else 1.0 - np.eye(n)
    wg = mask * t.grad_coef
    md = mask * t.m_diag
    a = (mask * t.k) @ scores - _weighted_displacement_sum(wg, y)
    g = np.einsum("nij,nj->ni", jacobians, a)
    g += _weighted_displacement_sum(ss * wg, y)
    g -= md @ scores - scores * md.sum(axis=1)[:, None]
    g -= _weighted_displacement_sum(mask * t.m_outer * q, y)
    g += _weighted_displacement_sum(mask * t.cross_div_grad_coef, y)
    if not np.all(np.isfinite(g)):
        _raise_nonfinite(g, "Stein kernel gradient")
    return u, g


def stein_kernel_up(target, kparams: KernelParams, y, y_prime):
    """u_p for a single pair of points."""
    pts = _points(target, np.stack([np.asarray(y, float), np.asarray(y_prime, float)]))
    s = target.score(pts)
    return float(stein_matrix(kparams, pts, s)[0, 1])


def _u_from_matrix(u):
    n = len(u)
    return (u.sum() - np.trace(u)) / (n * (n - 1))


def ksd_v(target, kparams: KernelParams, points) -> KsdEstimate:
    y = _points(target, points)
    if len(y) == 0:
        raise ValueError("need at least one point")
    u = stein_matrix(kparams, y, target.score(y))
    return KsdEstimate(float(u.mean()), "V", len(y))


def ksd_u(target, kparams: KernelParams, points) -> KsdEstimate:
    y = _points(target, points)
    if len(y) < 2:
        raise ValueError("U-statistic needs at least two points")
    u = stein_matrix(kparams, y, target.score(y))
    return KsdEstimate(float(_u_from_matrix(u)), "U", len(y))


def stein_point_gradients(kparams: KernelParams, y, scores, jacobians, include_diagonal=False):
    """Row sums ``G_i = sum_j du/dy(y_i, y_j)``, diagonal excluded unless requested."""
    return _stein_core(kparams, y, scores, jacobians, include_diagonal)[1]


@dataclass(frozen=True)
class KsdStep:
    """Everything one training iteration needs from a batch."""

    u_stat: float
    v_stat: float
    diag_sum: float
    grad: np.ndarray
    n: int


def ksd_value_and_grad(target, kparams: KernelParams, tmap, theta, x_batch, statistic="U"):
    """U and V statistics of the pushed-forward batch and the gradient of one of them."""
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    n = len(x)
    if n < 2:
        raise ValueError("gradient estimator needs a batch of at least two")
    y = tmap.forward(theta, x)
    if not np.all(np.isfinite(y)):
        raise NumericFailure("transport map produced non-finite points")
    if statistic not in ("U", "V"):
        raise ValueError(f"unknown statistic {statistic!r}")
    scores, jac = target.score_and_jacobian(y)
    u, g = _stein_core(kparams, y, scores, jac, include_diagonal=statistic == "V")
    diag = float(np.trace(u))
    total = float(u.sum())
    u_stat = (total - diag) / (n * (n - 1))
    v_stat = total / n**2
    scale = n * (n - 1) if statistic == "U" else n**2
    grad = tmap.vjp_params(theta, x, 2.0 * g / scale)
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("non-finite parameter gradient")
    return KsdStep(u_stat, v_stat, diag, grad, n)


def ksd_grad(target, kparams: KernelParams, tmap, theta, x_batch, statistic="U") -> GradEstimate:
    """Unbiased (U) or plug-in (V) gradient of squared KSD with respect to map parameters."""
    step = ksd_value_and_grad(target, kparams, tmap, theta, x_batch, statistic)
    return GradEstimate(step.grad, step.n)


def ksd_objective(target, kparams: KernelParams, tmap, theta, x_batch, statistic="U"):
    """Fixed-batch squared-KSD estimate as a function of the map parameters."""
    y = tmap.forward(theta, np.atleast_2d(x_batch))
    u = stein_matrix(kparams, y, target.score(y))
    return float(_u_from_matrix(u) if statistic == "U" else u.mean())


def kld_loss_and_grad(tmap, reference, target, theta, x_batch):
    """Reverse-KL loss ``mean(-log|det dT| - log p(T(x)))`` and its gradient.

    The reference entropy term does not depend on the parameters and is dropped.
    ``reference`` is accepted for interface symmetry.
    """
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    n = len(x)
    y = tmap.forward(theta, x)
    if not np.all(np.isfinite(y)):
        raise NumericFailure("transport map produced non-finite points")
    logdet = tmap.log_det_jacobian(theta, x)
    logp = target.log_density(y)
    s = target.score(y)
    loss = float(np.mean(-logdet - logp))
    grad = (-tmap.grad_params_log_det(theta, x) - tmap.vjp_params(theta, x, s)) / n
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NumericFailure("non-finite KLD loss or gradient")
    return loss, GradEstimate(grad, n)
