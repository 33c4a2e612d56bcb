"""Reference distributions, seeded random streams and shifted-lattice QMC.

Random streams are Philox (counter-based) generators keyed by a tuple of
integers, so ``make_rng(seed, STREAM_TRAIN)`` and ``make_rng(seed,
STREAM_EVAL)`` never overlap and need no shared state.

Gaussian and Laplace draws are produced by pushing open-interval uniforms
through the inverse CDF; the same transform serves Monte Carlo and QMC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .errors import UnsupportedCapability

STREAM_TRAIN = 1
STREAM_EVAL = 2
STREAM_HMC = 3
STREAM_INIT = 4
STREAM_TARGET = 5

_LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniforms strictly inside (0, 1), on the 2**-53 grid offset by half a cell."""
    return (rng.integers(0, 2**53, size=shape, dtype=np.int64) + 0.5) * 2.0**-53


# Acklam's rational approximation to the normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _poly(coefs, x):
    out = np.zeros_like(x)
    for c in coefs:
        out = out * x + c
    return out


def _lower_half_quantile(p):
    # p in (0, 0.5]; returns Phi^-1(p) <= 0
    x = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    x[tail] = _poly(_C, q) / (_poly(_D, q) * q + 1.0)
    mid = ~tail
    q = p[mid] - 0.5
    r = q * q
    x[mid] = _poly(_A, r) * q / (_poly(_B, r) * r + 1.0)
    # one Halley step against the erfc-based CDF
    e = ndtr(x) - p
    u = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def gaussian_inverse_cdf(u):
    """Standard normal quantile for ``u`` in the open interval (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0.0)) or np.any(~(u < 1.0)):
        raise ValueError("inverse CDF requires 0 < u < 1")
    flat = np.atleast_1d(u).ravel()
    out = np.empty_like(flat)
    upper = flat > 0.5
    # 1 - u is exact for u in (0.5, 1)
    out[~upper] = _lower_half_quantile(flat[~upper])
    out[upper] = -_lower_half_quantile(1.0 - flat[upper])
    return out.reshape(u.shape) if u.ndim else out[0]


class ReferenceSampler:
    """Contract: ``dim``, ``sample(rng, n)``, ``log_density(x)``; optional ``inverse_cdf(u)``."""

    dim: int
    has_inverse_cdf = False

    def sample(self, rng, n):
        if n <= 0:
            raise ValueError("n must be positive")
        return self.inverse_cdf(open_uniform(rng, (n, self.dim)))

    def log_density(self, x):
        raise NotImplementedError

    def inverse_cdf(self, u):
        raise NotImplementedError(f"{type(self).__name__} has no inverse CDF")


@dataclass(frozen=True)
class GaussianReference(ReferenceSampler):
    """Independent normals with per-coordinate mean and scale."""

    dim: int = 2
    mean: tuple | None = None
    scale: float = 1.0

    has_inverse_cdf = True

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        m = (0.0,) * self.dim if self.mean is None else tuple(float(v) for v in self.mean)
        if len(m) != self.dim:
            raise ValueError("mean has wrong length")
        object.__setattr__(self, "mean", m)

    def inverse_cdf(self, u):
        return np.array(self.mean) + self.scale * gaussian_inverse_cdf(u)

    def log_density(self, x):
        z = (np.asarray(x, dtype=np.float64) - np.array(self.mean)) / self.scale
        return -0.5 * np.sum(z * z, axis=-1) - self.dim * (math.log(self.scale) + 0.5 * _LOG_2PI)

    def as_target(self, dim=None):
        from .targets import GaussianTarget
        if dim is None or dim == self.dim:
            return GaussianTarget(self.mean, (self.scale**2,) * self.dim)
        return GaussianTarget((0.0,) * dim, (self.scale**2,) * dim)


@dataclass(frozen=True)
class LaplaceReference(ReferenceSampler):
    """Independent Laplace coordinates with common location and scale."""

    dim: int = 2
    loc: float = 0.0
    scale: float = 1.0

    has_inverse_cdf = True

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=np.float64)
        if np.any(~(u > 0.0)) or np.any(~(u < 1.0)):
            raise ValueError("inverse CDF requires 0 < u < 1")
        w = u - 0.5
        return self.loc - self.scale * np.sign(w) * np.log1p(-2.0 * np.abs(w))

    def log_density(self, x):
        z = np.abs(np.asarray(x, dtype=np.float64) - self.loc) / self.scale
        return -np.sum(z, axis=-1) - self.dim * math.log(2.0 * self.scale)

    def as_target(self, dim=None):
        return _LaplaceTarget(self)


@dataclass(frozen=True)
class GmmReference(ReferenceSampler):
    """Finite mixture of isotropic Gaussians with a common scale."""

    weights: tuple = (0.5, 0.5)
    means: tuple = ((0.0, -3.0), (0.0, 3.0))
    scale: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "means", tuple(tuple(float(v) for v in m) for m in self.means))
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @property
    def dim(self):
        return len(self.means[0])

    def sample_with_ids(self, rng, n):
        if n <= 0:
            raise ValueError("n must be positive")
        u = open_uniform(rng, (n, 1 + self.dim))
        ids = np.searchsorted(np.cumsum(self.weights), u[:, 0], side="right")
        ids = np.minimum(ids, len(self.weights) - 1)
        x = np.array(self.means)[ids] + self.scale * gaussian_inverse_cdf(u[:, 1:])
        return x, ids

    def sample(self, rng, n):
        return self.sample_with_ids(rng, n)[0]

    def log_density(self, x):
        x = np.asarray(x, dtype=np.float64)
        mu = np.array(self.means)
        z2 = np.sum((x[..., None, :] - mu) ** 2, axis=-1) / self.scale**2
        logs = (np.log(self.weights) - 0.5 * z2
                - self.dim * (math.log(self.scale) + 0.5 * _LOG_2PI))
        return logsumexp(logs, axis=-1)

    def as_target(self, dim=None):
        from .targets import MultimodalTarget
        if len(set(self.weights)) != 1:
            raise UnsupportedCapability("only equal-weight mixtures can serve as a target")
        return MultimodalTarget(self.means, self.scale)


class _LaplaceTarget:
    """Laplace reference viewed as a target; the score Jacobian vanishes off the axes."""

    def __init__(self, ref):
        self._ref = ref
        self.dim = ref.dim

    def log_density(self, y):
        return self._ref.log_density(y)

    def score(self, y):
        return -np.sign(np.asarray(y, dtype=np.float64) - self._ref.loc) / self._ref.scale

    def score_jacobian(self, y):
        y = np.asarray(y, dtype=np.float64)
        return np.zeros(y.shape + (self.dim,))

    def score_and_jacobian(self, y):
        return self.score(y), self.score_jacobian(y)


def gaussian_sample(p, rng, n):
    return GaussianReference(p).sample(rng, n)


def laplace_sample(loc, scale, rng, n, dim=2):
    return LaplaceReference(dim, loc, scale).sample(rng, n)


def gmm_sample(weights, means, rng, n):
    return GmmReference(tuple(weights), tuple(map(tuple, means))).sample(rng, n)


def shifted_lattice(grid, shift):
    """Points ``(grid + shift) mod 1``; rejects any coordinate landing on 0.

    ``grid`` has shape ``(n, p)`` with entries in [0, 1) and ``shift`` has
    shape ``(p,)``.
    """
    pts = np.mod(np.asarray(grid, dtype=np.float64) + np.asarray(shift, dtype=np.float64), 1.0)
    if np.any(pts <= 0.0) or np.any(pts >= 1.0):
        raise ValueError("shifted lattice hits the boundary of (0, 1)")
    return pts


@dataclass(frozen=True)
class QmcGrid:
    """Tensor lattice with cells offset by half a width, shifted modulo 1 per draw."""

    base: ReferenceSampler
    grid_counts: tuple

    def __post_init__(self):
        if not getattr(self.base, "has_inverse_cdf", False):
            raise ValueError("QMC needs a reference with an inverse CDF")
        counts = tuple(int(c) for c in self.grid_counts)
        if len(counts) != self.base.dim or min(counts) < 1:
            raise ValueError("grid_counts must give a positive count per coordinate")
        object.__setattr__(self, "grid_counts", counts)

    @classmethod
    def for_batch(cls, base, n):
        """Near-square factorisation of ``n`` across the reference dimensions."""
        counts = _factor_grid(n, base.dim)
        return cls(base, counts)

    @property
    def size(self):
        return int(np.prod(self.grid_counts))

    def lattice(self):
        axes = [(np.arange(m) + 0.5) / m for m in self.grid_counts]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)


def _factor_grid(n, p):
    counts = []
    rest = n
    for k in range(p, 0, -1):
        target = round(rest ** (1.0 / k))
        m = next(c for c in sorted(range(1, rest + 1), key=lambda c: (abs(c - target), c))
                 if rest % c == 0)
        counts.append(m)
        rest //= m
    return tuple(counts)


def qmc_sample(grid: QmcGrid, rng, n):
    """One randomly shifted copy of the lattice pushed through the inverse CDF."""
    if n != grid.size:
        raise ValueError(f"QMC batch size must equal the lattice size {grid.size}")
    while True:
        shift = rng.random(grid.base.dim)
        try:
            u = shifted_lattice(grid.lattice(), shift)
        except ValueError:
            continue
        return grid.base.inverse_cdf(u)


def make_reference(kind: str, dim: int = 2, params: dict | None = None) -> ReferenceSampler:
    params = dict(params or {})
    if kind == "gaussian":
        return GaussianReference(dim, **params)
    if kind == "laplace":
        return LaplaceReference(dim, **params)
    if kind == "gmm":
        if "means" in params:
            params["means"] = tuple(map(tuple, params["means"]))
        if "weights" in params:
            params["weights"] = tuple(params["weights"])
        ref = GmmReference(**params)
        if ref.dim != dim:
            raise ValueError("gmm means do not match the reference dimension")
        return ref
    raise ValueError(f"unknown reference kind {kind!r}")
