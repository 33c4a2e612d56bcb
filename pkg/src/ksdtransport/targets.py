"""Target distributions: log-density, score and score Jacobian.

Every method accepts points of shape ``(..., d)``. The base class derives the
score and its Jacobian by forward-mode differentiation of ``log_density``;
subclasses with cheap closed forms override them.

Log-densities are unnormalised: constants independent of the point may be
dropped. The synthetic test-bed densities (sinusoidal, banana, multimodal)
are nevertheless evaluated exactly as the normalised products/mixtures
they are defined as, since the constants cost nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import diff
from .errors import NumericFailure

_LOG_2PI = np.log(2.0 * np.pi)


def _log_normal(x, mean, sd):
    """Log of the univariate normal density, dual-number friendly."""
    z = (x - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * _LOG_2PI


def _as_points(target, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != target.dim:
        raise ValueError(f"expected points of dimension {target.dim}, got {y.shape[-1]}")
    if not np.all(np.isfinite(y)):
        raise NumericFailure("non-finite point passed to target")
    return y


class TargetModel:
    """Base contract; subclasses implement ``_log_density`` on arrays or duals."""

    dim: int

    def _log_density(self, y):
        raise NotImplementedError

    def log_density(self, y):
        return self._log_density(_as_points(self, y))

    def score(self, y):
        return diff.grad(self._log_density, _as_points(self, y))

    def score_jacobian(self, y):
        return diff.hessian(self._log_density, _as_points(self, y))

    def score_and_jacobian(self, y):
        return diff.grad_and_hessian(self._log_density, _as_points(self, y))


@dataclass(frozen=True)
class GaussianTarget(TargetModel):
    """Diagonal Gaussian; unnormalised (zero at the mean)."""

    mean: tuple
    variances: tuple

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        if len(self.mean) != len(self.variances):
            raise ValueError("mean and variances differ in length")
        if min(self.variances) <= 0:
            raise ValueError("variances must be positive")

    @classmethod
    def standard(cls, dim):
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self):
        return len(self.mean)

    def _log_density(self, y):
        z = (y - np.array(self.mean)) / np.sqrt(np.array(self.variances))
        return -0.5 * (z * z).sum(axis=-1)

    def score(self, y):
        y = _as_points(self, y)
        return -(y - np.array(self.mean)) / np.array(self.variances)

    def score_jacobian(self, y):
        y = _as_points(self, y)
        return np.broadcast_to(-np.diag(1.0 / np.array(self.variances)),
                               y.shape[:-1] + (self.dim, self.dim)).copy()

    def score_and_jacobian(self, y):
        return self.score(y), self.score_jacobian(y)

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.dim))
        return np.array(self.mean) + np.sqrt(np.array(self.variances)) * z


@dataclass(frozen=True)
class SinusoidalTarget(TargetModel):
    """N(x; 0, eta1^2) N(y; sin(b x), eta2^2)."""

    eta1: float = 1.3
    eta2: float = 0.001
    b: float = 1.2
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ValueError("eta1 and eta2 must be positive")

    def _log_density(self, p):
        x, y = p[..., 0], p[..., 1]
        return _log_normal(x, 0.0, self.eta1) + _log_normal(y, np.sin(x * self.b), self.eta2)

    def sample(self, rng, n):
        x = self.eta1 * rng.standard_normal(n)
        y = np.sin(self.b * x) + self.eta2 * rng.standard_normal(n)
        return np.column_stack([x, y])


@dataclass(frozen=True)
class BananaTarget(TargetModel):
    """N(x; 0, sigma1^2) N(y; a x^2, sigma2^2)."""

    sigma1: float = 1.0
    sigma2: float = 0.1
    a: float = 0.5
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigma1 and sigma2 must be positive")

    def _log_density(self, p):
        x, y = p[..., 0], p[..., 1]
        return _log_normal(x, 0.0, self.sigma1) + _log_normal(y, x * x * self.a, self.sigma2)

    def sample(self, rng, n):
        x = self.sigma1 * rng.standard_normal(n)
        y = self.a * x**2 + self.sigma2 * rng.standard_normal(n)
        return np.column_stack([x, y])


MULTIMODAL_MEANS = ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0))


@dataclass(frozen=True)
class MultimodalTarget(TargetModel):
    """Equal-weight mixture of isotropic Gaussians."""

    means: tuple = MULTIMODAL_MEANS
    sigma: float = 0.2

    def __post_init__(self):
        means = tuple(tuple(float(v) for v in m) for m in self.means)
        object.__setattr__(self, "means", means)
        if not means:
            raise ValueError("need at least one component")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def dim(self):
        return len(self.means[0])

    def _component_logs(self, y):
        mu = np.array(self.means)
        d2 = np.sum((y[..., None, :] - mu) ** 2, axis=-1)
        return (-0.5 * d2 / self.sigma**2 - self.dim * np.log(self.sigma)
                - 0.5 * self.dim * _LOG_2PI - np.log(len(mu)))

    def _log_density(self, y):
        if isinstance(y, diff._Jet):
            # max-shifted log-sum-exp with the shift held constant
            terms = []
            for m in self.means:
                diffs = y - np.array(m)
                terms.append(-0.5 * (diffs * diffs).sum(axis=-1) / self.sigma**2)
            shift = np.max(np.stack([t.primal for t in terms]), axis=0)
            total = terms[0] - shift
            acc = np.exp(total)
            for t in terms[1:]:
                acc = acc + np.exp(t - shift)
            return (np.log(acc) + shift - self.dim * np.log(self.sigma)
                    - 0.5 * self.dim * _LOG_2PI - np.log(len(self.means)))
        return logsumexp(self._component_logs(y), axis=-1)

    def _responsibilities(self, y):
        logs = self._component_logs(y)
        return np.exp(logs - logsumexp(logs, axis=-1, keepdims=True))

    def score(self, y):
        return self.score_and_jacobian(y)[0]

    def score_jacobian(self, y):
        return self.score_and_jacobian(y)[1]

    def score_and_jacobian(self, y):
        y = _as_points(self, y)
        w = self._responsibilities(y)
        dk = (np.array(self.means) - y[..., None, :]) / self.sigma**2
        g = np.einsum("...k,...ki->...i", w, dk)
        second = np.einsum("...k,...ki,...kj->...ij", w, dk, dk)
        jac = second - g[..., :, None] * g[..., None, :] - np.eye(self.dim) / self.sigma**2
        return g, jac

    def sample(self, rng, n):
        ids = rng.integers(0, len(self.means), size=n)
        return np.array(self.means)[ids] + self.sigma * rng.standard_normal((n, self.dim))


BOD_TIMES = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
BOD_THETA_TRUE = (0.0, float(np.log(0.1)))


def bod_forward(theta, t):
    """Oxygen demand curve exp(theta1) * (1 - exp(-exp(theta2) * t))."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.exp(theta[..., 0]) * (1.0 - np.exp(-np.exp(theta[..., 1]) * np.asarray(t)))


def bod_generate_data(theta_true=BOD_THETA_TRUE, times=BOD_TIMES, noise_sigma=0.05, seed=0):
    """Noisy observations of the oxygen demand curve at ``times``."""
    if not noise_sigma >= 0:
        raise ValueError("noise_sigma must be nonnegative")
    t = np.asarray(times, dtype=np.float64)
    clean = np.array([bod_forward(theta_true, ti) for ti in t])
    if noise_sigma == 0:
        return clean
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0xB0D])))
    return clean + noise_sigma * rng.standard_normal(t.shape)


@dataclass(frozen=True)
class BodPosterior(TargetModel):
    """Posterior over log-rates of the oxygen demand model with a N(0, I) prior."""

    observations: tuple = None
    times: tuple = BOD_TIMES
    noise_sigma: float = 0.05
    data_seed: int = 0
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        obs = self.observations
        if obs is None:
            obs = bod_generate_data(BOD_THETA_TRUE, self.times, self.noise_sigma, self.data_seed)
        object.__setattr__(self, "observations", tuple(float(o) for o in obs))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if len(self.observations) != len(self.times):
            raise ValueError("times and observations differ in length")

    def _log_density(self, theta):
        t1, t2 = theta[..., 0], theta[..., 1]
        out = -0.5 * (t1 * t1 + t2 * t2)
        a1, a2 = np.exp(t1), np.exp(t2)
        for ti, yi in zip(self.times, self.observations):
            resid = (yi - a1 * (1.0 - np.exp(a2 * -ti))) / self.noise_sigma
            out = out - 0.5 * resid * resid
        return out

    def score(self, y):
        # closed form; HMC calls this in its inner loop
        y = _as_points(self, y)
        t1, t2 = y[..., 0], y[..., 1]
        a1, a2 = np.exp(t1), np.exp(t2)
        g1, g2 = -t1, -t2
        for ti, yi in zip(self.times, self.observations):
            decay = np.exp(-a2 * ti)
            w = (yi - a1 * (1.0 - decay)) / self.noise_sigma**2
            g1 = g1 + w * a1 * (1.0 - decay)
            g2 = g2 + w * a1 * a2 * ti * decay
        return np.stack([g1, g2], axis=-1)


def make_target(kind: str, params: dict | None = None) -> TargetModel:
    params = dict(params or {})
    kinds = {
        "sinusoidal": SinusoidalTarget,
        "banana": BananaTarget,
        "multimodal": MultimodalTarget,
        "bod": BodPosterior,
        "gaussian": GaussianTarget,
    }
    if kind not in kinds:
        raise ValueError(f"unknown target kind {kind!r}")
    if kind == "gaussian" and "mean" not in params:
        dim = params.pop("dim", 2)
        params.setdefault("mean", (0.0,) * dim)
        params.setdefault("variances", (1.0,) * dim)
    return kinds[kind](**params)
