"""Fixed-weight mixtures of transport maps.

A mixture input row is ``(component_id, x_1 .. x_p)``: the first column
routes the row to its component, whose parameters occupy a contiguous
slice of the mixture parameter vector. ``MixtureReference`` draws such rows,
so the generic training loop handles mixtures unchanged and gradients only
reach the component that produced each point.
"""
from __future__ import annotations

import numpy as np

from ..reference import ReferenceSampler, open_uniform
from .base import TransportMap, as_batch


def _check_weights(weights):
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("mixture weights must be nonnegative and sum to one")
    return w


class MixtureMap(TransportMap):
    kind = "mixture"

    def __init__(self, components):
        self.components = list(components)
        p = {c.input_dim for c in self.components}
        d = {c.output_dim for c in self.components}
        if len(p) != 1 or len(d) != 1:
            raise ValueError("mixture components must share input and output dimensions")
        self.input_dim = p.pop() + 1
        self.output_dim = d.pop()
        self.offsets = np.cumsum([0] + [c.param_count for c in self.components])
        self.param_count = int(self.offsets[-1])

    def topology(self):
        return {"kind": self.kind, "components": [c.topology() for c in self.components]}

    def split(self, theta):
        theta = self.check_theta(theta)
        return [theta[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def _groups(self, x):
        ids = x[:, 0].astype(int)
        if np.any((ids < 0) | (ids >= len(self.components))) or np.any(ids != x[:, 0]):
            raise ValueError("invalid component ids in mixture input")
        return [np.flatnonzero(ids == k) for k in range(len(self.components))]

    def forward(self, theta, x):
        x, single = as_batch(x, self.input_dim)
        y = np.empty((len(x), self.output_dim))
        for comp, th, rows in zip(self.components, self.split(theta), self._groups(x)):
            if len(rows):
                y[rows] = comp.forward(th, x[rows, 1:])
        return y[0] if single else y

    def vjp_params(self, theta, x, v):
        x, _ = as_batch(x, self.input_dim)
        v = np.asarray(v, dtype=np.float64).reshape(len(x), self.output_dim)
        out = []
        for comp, th, rows in zip(self.components, self.split(theta), self._groups(x)):
            if len(rows):
                out.append(comp.vjp_params(th, x[rows, 1:], v[rows]))
            else:
                out.append(np.zeros(comp.param_count))
        return np.concatenate(out)

    def random_params(self, rng):
        return np.concatenate([c.random_params(rng) for c in self.components])

    def identity_params(self, rng=None):
        return np.concatenate([c.identity_params(rng) for c in self.components])


class MixtureReference(ReferenceSampler):
    """Product reference ``Q_1 x .. x Q_K`` with a categorical component draw."""

    def __init__(self, references, weights=None):
        self.references = list(references)
        k = len(self.references)
        self.weights = _check_weights(np.full(k, 1.0 / k) if weights is None else weights)
        dims = {r.dim for r in self.references}
        if len(dims) != 1:
            raise ValueError("component references must share a dimension")
        self.base_dim = dims.pop()
        self.dim = self.base_dim + 1

    def sample(self, rng, n):
        if n <= 0:
            raise ValueError("n must be positive")
        u = open_uniform(rng, (n,))
        ids = np.minimum(np.searchsorted(np.cumsum(self.weights), u, side="right"),
                         len(self.weights) - 1)
        x = np.empty((n, self.base_dim))
        for k, ref in enumerate(self.references):
            rows = np.flatnonzero(ids == k)
            if len(rows):
                x[rows] = ref.sample(rng, len(rows))
        return np.column_stack([ids.astype(np.float64), x])

    def log_density(self, x):
        raise NotImplementedError("mixture inputs carry a discrete component label")


def mixture_forward_sample(components, weights, rng, n):
    """Draw from ``sum_k w_k T_k # Q_k``.

    ``components`` is a list of ``(map, theta, reference)``. Returns the
    points and the component index of each.
    """
    maps = [c[0] for c in components]
    thetas = [np.asarray(c[1], dtype=np.float64) for c in components]
    mix = MixtureMap(maps)
    ref = MixtureReference([c[2] for c in components], weights)
    x = ref.sample(rng, n)
    return mix.forward(np.concatenate(thetas), x), x[:, 0].astype(int)
