"""Inverse autoregressive flows on a one-hidden-layer masked conditioner.

The conditioner maps ``x`` to per-coordinate ``(mu_i, s_i)`` that depend on
``x_1 .. x_{i-1}`` only, via MADE degree masks: inputs carry degrees
``1..d``, hidden units cycle through ``1..d-1``, a hidden unit sees inputs
of degree ``<=`` its own and output ``i`` sees hidden units of degree ``< i``.
"""
from __future__ import annotations

import numpy as np

from ..errors import NumericFailure
from .base import TransportMap, as_batch, fan_in_uniform


def made_masks(d, hidden):
    in_deg = np.arange(1, d + 1)
    hid_deg = np.arange(hidden) % max(d - 1, 1) + 1
    mask_in = (hid_deg[:, None] >= in_deg[None, :]).astype(np.float64)
    out_deg = np.concatenate([in_deg, in_deg])
    mask_out = (out_deg[:, None] > hid_deg[None, :]).astype(np.float64)
    return mask_in, mask_out


def _log_sigmoid(s):
    return -np.logaddexp(0.0, -s)


def _sigmoid(s):
    return np.exp(_log_sigmoid(s))


class _MadeFlow(TransportMap):
    has_log_det = True
    supports_identity = True

    def __init__(self, dim=2, hidden=40):
        self.dim = self.input_dim = self.output_dim = int(dim)
        self.hidden = int(hidden)
        self.mask_in, self.mask_out = made_masks(self.dim, self.hidden)
        d, h = self.dim, self.hidden
        self._shapes = [("w1", (h, d)), ("b1", (h,)), ("w2", (2 * d, h)), ("b2", (2 * d,))]
        self.param_count = sum(int(np.prod(s)) for _, s in self._shapes)

    def topology(self):
        return {"kind": self.kind, "dim": self.dim, "hidden": self.hidden}

    def unpack(self, theta):
        theta = self.check_theta(theta)
        out, k = {}, 0
        for name, shape in self._shapes:
            size = int(np.prod(shape))
            out[name] = theta[k:k + size].reshape(shape)
            k += size
        return out

    def conditioner(self, theta, x):
        """Returns ``(mu, s, cache)`` for a batch ``x``."""
        p = self.unpack(theta)
        w1 = p["w1"] * self.mask_in
        w2 = p["w2"] * self.mask_out
        pre = x @ w1.T + p["b1"]
        h = np.maximum(pre, 0.0)
        out = h @ w2.T + p["b2"]
        return out[:, :self.dim], out[:, self.dim:], (pre, h, w2)

    def forward(self, theta, x):
        x, single = as_batch(x, self.dim)
        mu, s, _ = self.conditioner(theta, x)
        y = self._transform(x, mu, s)
        return y[0] if single else y

    def log_det_jacobian(self, theta, x):
        x, single = as_batch(x, self.dim)
        _, s, _ = self.conditioner(theta, x)
        ld = self._log_det(s)
        return ld[0] if single else ld

    def vjp_params(self, theta, x, v):
        return self._backward(theta, x, v, None)

    def grad_params_log_det(self, theta, x, w=None):
        xb, _ = as_batch(x, self.dim)
        w = np.ones(len(xb)) if w is None else np.atleast_1d(np.asarray(w, dtype=np.float64))
        return self._backward(theta, x, None, w)

    def _backward(self, theta, x, v, w):
        x, _ = as_batch(x, self.dim)
        mu, s, (pre, h, w2) = self.conditioner(theta, x)
        g_mu, g_s = self._transform_grads(x, mu, s, v, w)
        g_out = np.concatenate([g_mu, g_s], axis=1)
        gw2 = (g_out.T @ h) * self.mask_out
        gb2 = g_out.sum(axis=0)
        g_pre = (g_out @ w2) * (pre > 0.0)
        gw1 = (g_pre.T @ x) * self.mask_in
        gb1 = g_pre.sum(axis=0)
        return np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])

    def _hidden_params(self, rng):
        d, h = self.dim, self.hidden
        return [fan_in_uniform(rng, (h, d), d) * self.mask_in, fan_in_uniform(rng, (h,), d)]

    def identity_params(self, rng=None):
        # the output layer is zero so T is the identity, but the hidden layer
        # is random: all-zero ReLU units would get no gradient and stay dead
        rng = np.random.default_rng(0) if rng is None else rng
        theta = np.zeros(self.param_count)
        hidden = np.concatenate([p.ravel() for p in self._hidden_params(rng)])
        theta[:hidden.size] = hidden
        return theta

    def random_params(self, rng):
        d, h = self.dim, self.hidden
        parts = self._hidden_params(rng) + [fan_in_uniform(rng, (2 * d, h), h) * self.mask_out,
                                            fan_in_uniform(rng, (2 * d,), h)]
        return np.concatenate([p.ravel() for p in parts])


class IAF(_MadeFlow):
    """``T(x) = mu + exp(s) * x``."""

    kind = "iaf"

    def _transform(self, x, mu, s):
        if np.any(s > 700.0):
            raise NumericFailure("IAF log-scale exceeds 700; exp would overflow")
        return mu + np.exp(s) * x

    def _log_det(self, s):
        return s.sum(axis=-1)

    def _transform_grads(self, x, mu, s, v, w):
        g_mu = np.zeros_like(mu)
        g_s = np.zeros_like(s)
        if v is not None:
            v = np.asarray(v, dtype=np.float64).reshape(mu.shape)
            g_mu += v
            g_s += v * np.exp(s) * x
        if w is not None:
            g_s += w[:, None]
        return g_mu, g_s


class StableIAF(_MadeFlow):
    """``T(x) = sigmoid(s) * x + (1 - sigmoid(s)) * mu``."""

    kind = "stable-iaf"
    identity_gate = 30.0

    def _transform(self, x, mu, s):
        g = _sigmoid(s)
        return g * x + (1.0 - g) * mu

    def _log_det(self, s):
        return _log_sigmoid(s).sum(axis=-1)

    def _transform_grads(self, x, mu, s, v, w):
        g = _sigmoid(s)
        g_mu = np.zeros_like(mu)
        g_s = np.zeros_like(s)
        if v is not None:
            v = np.asarray(v, dtype=np.float64).reshape(mu.shape)
            g_mu += v * (1.0 - g)
            g_s += v * g * (1.0 - g) * (x - mu)
        if w is not None:
            g_s += w[:, None] * (1.0 - g)
        return g_mu, g_s

    def identity_params(self, rng=None):
        # sigmoid(30) = 1 - 9.4e-14: the gate saturates, mu = 0
        theta = super().identity_params(rng)
        theta[-self.dim:] = self.identity_gate
        return theta
