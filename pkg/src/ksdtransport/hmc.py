"""Leapfrog HMC with identity mass and dual-averaging step-size adaptation.

Chains are advanced together as one batch so that each leapfrog step is a
single vectorised score call, but every chain owns its random stream and
step size, so the result for chain ``c`` does not depend on how many other
chains run alongside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, HmcDiagnosticError, NumericFailure
from .reference import STREAM_HMC, gaussian_inverse_cdf, make_rng, open_uniform


@dataclass(frozen=True)
class HmcConfig:
    warmup: int = 1000
    samples: int = 5000
    target_accept: float = 0.8
    leapfrog_steps: int = 32
    jitter: float = 0.2
    step_size: float = 0.1
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    seed: int = 0
    thin: int = 1
    n_chains: int = 1
    init: tuple | None = None

    def __post_init__(self):
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigError("target_accept must lie in (0, 1)")
        if self.leapfrog_steps < 1:
            raise ConfigError("leapfrog_steps must be at least 1")
        if not 0.0 <= self.jitter < 1.0:
            raise ConfigError("jitter must lie in [0, 1)")
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")
        if self.warmup < 1 or self.samples < 1 or self.thin < 1 or self.n_chains < 1:
            raise ConfigError("warmup, samples, thin and n_chains must be positive")


@dataclass
class Chain:
    """Post-warmup draws merged in chain order.

    ``samples`` has shape ``(n_chains * (samples // thin), d)``; the
    acceptance arrays have one row per chain.
    """

    samples: np.ndarray
    accept_stat: np.ndarray
    warmup_accept: np.ndarray
    step_size: np.ndarray
    divergences: int

    @property
    def mean_accept(self):
        return float(self.accept_stat.mean())


def leapfrog(target, y, momentum, eps, steps):
    """``steps`` half-kick / drift / half-kick updates.

    ``eps`` may be a scalar or one value per row of ``y``. Returns the new
    position and momentum.
    """
    y = np.array(y, dtype=np.float64)
    m = np.array(momentum, dtype=np.float64)
    if steps == 0:
        return y, m
    e = np.asarray(eps, dtype=np.float64)
    if e.ndim == 1:
        e = e[:, None]
    with np.errstate(all="ignore"):
        m = m + 0.5 * e * target.score(y)
        for i in range(steps):
            y = y + e * m
            g = target.score(y)
            m = m + (e if i < steps - 1 else 0.5 * e) * g
    return y, m


def _hamiltonian(target, y, m):
    with np.errstate(all="ignore"):
        return -target.log_density(y) + 0.5 * np.sum(m * m, axis=-1)


def _safe_score(target, y, bad):
    """Scores of the live rows; rows whose score fails or overflows join ``bad``."""
    g = np.zeros_like(y)
    good = np.flatnonzero(~bad)
    if len(good):
        try:
            g[good] = target.score(y[good])
        except (NumericFailure, ValueError):
            bad = bad.copy()
            for i in good:
                try:
                    g[i] = target.score(y[i])
                except (NumericFailure, ValueError):
                    bad[i] = True
    bad = bad | ~np.all(np.isfinite(g), axis=1)
    g[bad] = 0.0
    return g, bad


def _masked_leapfrog(target, y, m, eps, steps):
    """Batched leapfrog where row ``c`` takes ``steps[c]`` steps.

    A row whose trajectory turns non-finite is frozen and flagged; the
    returned mask marks these divergent rows.
    """
    y = y.copy()
    m = m.copy()
    e = eps[:, None]
    bad = np.zeros(len(y), dtype=bool)
    with np.errstate(all="ignore"):
        g, bad = _safe_score(target, y, bad)
        m = m + 0.5 * e * g
        for i in range(int(steps.max())):
            live = (i < steps) & ~bad
            y = np.where(live[:, None], y + e * m, y)
            bad |= ~np.all(np.isfinite(y), axis=1)
            g, bad = _safe_score(target, y, bad)
            kick = np.where((i == steps - 1)[:, None], 0.5 * e, e)
            m = np.where((live & ~bad)[:, None], m + kick * g, m)
            bad |= ~np.all(np.isfinite(m), axis=1)
    return y, m, bad


class _DualAverage:
    def __init__(self, eps0, cfg: HmcConfig):
        self.mu = np.log(10.0 * eps0)
        self.h_bar = np.zeros_like(eps0)
        self.log_eps_bar = np.zeros_like(eps0)
        self.cfg = cfg
        self.t = 0

    def update(self, accept):
        c = self.cfg
        self.t += 1
        t = self.t
        w = 1.0 / (t + c.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (c.target_accept - accept)
        log_eps = self.mu - math.sqrt(t) / c.gamma * self.h_bar
        eta = t ** (-c.kappa)
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar
        return np.exp(log_eps)

    @property
    def final(self):
        return np.exp(self.log_eps_bar)


def hmc_sample(target, config: HmcConfig) -> Chain:
    cfg = config
    d, k = target.dim, cfg.n_chains
    total = cfg.warmup + cfg.samples
    rngs = [make_rng(cfg.seed, STREAM_HMC, c) for c in range(k)]
    # per-chain noise for the whole run: momenta, jitter and accept uniforms
    mom = np.stack([gaussian_inverse_cdf(open_uniform(r, (total, d))) for r in rngs], axis=1)
    unif = np.stack([open_uniform(r, (total, 2)) for r in rngs], axis=1)
    if cfg.init is None:
        y = np.stack([gaussian_inverse_cdf(open_uniform(r, (d,))) for r in rngs])
    else:
        y = np.broadcast_to(np.asarray(cfg.init, dtype=np.float64), (k, d)).copy()
    if not np.all(np.isfinite(target.log_density(y))):
        raise HmcDiagnosticError("initial points have non-finite log-density")

    eps = np.full(k, float(cfg.step_size))
    adapt = _DualAverage(eps, cfg)
    lo = max(1, round(cfg.leapfrog_steps * (1.0 - cfg.jitter)))
    hi = max(lo, round(cfg.leapfrog_steps * (1.0 + cfg.jitter)))
    kept = cfg.samples // cfg.thin
    out = np.empty((k, kept, d))
    acc_w = np.empty((k, cfg.warmup))
    acc_s = np.empty((k, cfg.samples))
    divergent = 0
    for it in range(total):
        m0 = mom[it]
        steps = lo + np.floor(unif[it, :, 0] * (hi - lo + 1)).astype(int)
        h0 = _hamiltonian(target, y, m0)
        y1, m1, bad = _masked_leapfrog(target, y, m0, eps, steps)
        h1 = np.full(k, np.inf)
        h1[~bad] = _hamiltonian(target, y1[~bad], m1[~bad])
        ok = np.isfinite(h1) & ~bad
        divergent += int(np.sum(~ok))
        with np.errstate(over="ignore", invalid="ignore"):
            alpha = np.where(ok, np.minimum(1.0, np.exp(np.minimum(h0 - h1, 0.0))), 0.0)
        move = ok & (unif[it, :, 1] < alpha)
        y = np.where(move[:, None], np.where(bad[:, None], y, y1), y)
        if it < cfg.warmup:
            acc_w[:, it] = alpha
            eps = adapt.update(alpha)
            if it == cfg.warmup - 1:
                eps = adapt.final
        else:
            j = it - cfg.warmup
            acc_s[:, j] = alpha
            if (j + 1) % cfg.thin == 0 and j // cfg.thin < kept:
                out[:, j // cfg.thin] = y
    if acc_w.mean() < 0.01:
        raise HmcDiagnosticError(
            f"warmup acceptance {acc_w.mean():.4f} below 0.01; step size collapsed")
    return Chain(out.reshape(k * kept, d), acc_s, acc_w, eps, divergent)
