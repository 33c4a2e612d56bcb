"""Fully connected rectifier networks; not invertible, so no log-determinant."""
from __future__ import annotations

import numpy as np

from .base import TransportMap, as_batch, fan_in_uniform


class ReluMLP(TransportMap):
    kind = "relu"

    def __init__(self, input_dim=4, output_dim=2, hidden=(20, 20)):
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.sizes = (self.input_dim, *self.hidden, self.output_dim)
        self._shapes = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self._shapes += [(b, a), (b,)]
        self.param_count = sum(int(np.prod(s)) for s in self._shapes)

    def topology(self):
        return {"kind": self.kind, "input_dim": self.input_dim,
                "output_dim": self.output_dim, "hidden": list(self.hidden)}

    def layers(self, theta):
        theta = self.check_theta(theta)
        out, k = [], 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            out.append(theta[k:k + size].reshape(shape))
            k += size
        return list(zip(out[::2], out[1::2]))

    def _run(self, theta, x):
        acts, pres = [x], []
        layers = self.layers(theta)
        h = x
        for i, (w, b) in enumerate(layers):
            z = h @ w.T + b
            if i < len(layers) - 1:
                pres.append(z)
                h = np.maximum(z, 0.0)
                acts.append(h)
            else:
                h = z
        return h, acts, pres, layers

    def forward(self, theta, x):
        x, single = as_batch(x, self.input_dim)
        y = self._run(theta, x)[0]
        return y[0] if single else y

    def vjp_params(self, theta, x, v):
        x, _ = as_batch(x, self.input_dim)
        _, acts, pres, layers = self._run(theta, x)
        g = np.asarray(v, dtype=np.float64).reshape(len(x), self.output_dim)
        grads = []
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads.append((g.T @ acts[i], g.sum(axis=0)))
            if i > 0:
                g = (g @ w) * (pres[i - 1] > 0.0)
        grads.reverse()
        return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])

    def random_params(self, rng):
        parts = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            parts += [fan_in_uniform(rng, (b, a), a).ravel(), fan_in_uniform(rng, (b,), a)]
        return np.concatenate(parts)
