"""Forward-mode differentiation with dual numbers.

``Dual`` carries a value and one tangent; ``Dual2`` carries a value, a first
and a second directional derivative along one direction. Both wrap numpy
arrays so a single pass differentiates a whole batch of points, and both
hook into numpy ufuncs, so log-densities written with ``np.exp``,
``np.sin`` and friends work unchanged.

Gradients take ``d`` passes of ``Dual``; Hessians take ``d(d+1)/2`` passes
of ``Dual2`` using the polarisation identity
``H_ij = (D2[e_i + e_j] - D2[e_i] - D2[e_j]) / 2``.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericFailure


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# f, f', f'' for unary ufuncs, each as a function of the primal value.
_UNARY = {
    np.exp: (np.exp, np.exp, np.exp),
    np.log: (np.log, lambda v: 1.0 / v, lambda v: -1.0 / v**2),
    np.sin: (np.sin, np.cos, lambda v: -np.sin(v)),
    np.cos: (np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v)),
    np.sqrt: (np.sqrt, lambda v: 0.5 / np.sqrt(v), lambda v: -0.25 * v**-1.5),
    np.tanh: (np.tanh, lambda v: 1.0 - np.tanh(v) ** 2,
              lambda v: -2.0 * np.tanh(v) * (1.0 - np.tanh(v) ** 2)),
    np.square: (np.square, lambda v: 2.0 * v, lambda v: 2.0 * np.ones_like(v)),
    np.negative: (np.negative, lambda v: -np.ones_like(v), np.zeros_like),
}


def sigmoid(x):
    """Logistic function usable on arrays and dual numbers."""
    if isinstance(x, _Jet):
        v = x.primal
        sv = _sigmoid(v)
        return x._unary(sv, sv * (1.0 - sv), sv * (1.0 - sv) * (1.0 - 2.0 * sv))
    return _sigmoid(np.asarray(x, dtype=np.float64))


class _Jet:
    __array_priority__ = 100

    @property
    def primal(self):
        raise NotImplementedError

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        if len(inputs) == 1 and ufunc in _UNARY:
            f, df, d2f = _UNARY[ufunc]
            v = inputs[0].primal
            return inputs[0]._unary(f(v), df(v), d2f(v))
        binary = {
            np.add: type(self).__add__, np.subtract: type(self).__sub__,
            np.multiply: type(self).__mul__, np.true_divide: type(self).__truediv__,
            np.power: type(self).__pow__,
        }
        if len(inputs) == 2 and ufunc in binary:
            a, b = inputs
            if isinstance(a, _Jet):
                return binary[ufunc](a, b)
            return binary[ufunc](self._lift(a), b)
        return NotImplemented

    def __radd__(self, other):
        return self + other

    def __rsub__(self, other):
        return self._lift(other) - self

    def __rmul__(self, other):
        return self * other

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        return self * -1.0

    def __pos__(self):
        return self

    @property
    def shape(self):
        return np.shape(self.primal)


class Dual(_Jet):
    """First-order dual number ``value + eps * tangent``."""

    def __init__(self, value, tangent=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.tangent = (np.zeros_like(self.value) if tangent is None
                        else np.asarray(tangent, dtype=np.float64))

    @property
    def primal(self):
        return self.value

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual) else Dual(x)

    def _unary(self, f, df, d2f):
        return Dual(f, df * self.tangent)

    def __getitem__(self, idx):
        return Dual(self.value[idx], self.tangent[idx])

    def sum(self, axis=None):
        return Dual(self.value.sum(axis=axis), self.tangent.sum(axis=axis))

    def __add__(self, other):
        o = self._lift(other)
        return Dual(self.value + o.value, self.tangent + o.tangent)

    def __sub__(self, other):
        o = self._lift(other)
        return Dual(self.value - o.value, self.tangent - o.tangent)

    def __mul__(self, other):
        o = self._lift(other)
        return Dual(self.value * o.value, self.tangent * o.value + self.value * o.tangent)

    def __truediv__(self, other):
        o = self._lift(other)
        q = self.value / o.value
        return Dual(q, (self.tangent - q * o.tangent) / o.value)

    def __pow__(self, p):
        if isinstance(p, _Jet):
            return np.exp(np.log(self) * p)
        p = float(p)
        return Dual(self.value**p, p * self.value ** (p - 1.0) * self.tangent)

    def __repr__(self):
        return f"Dual({self.value!r}, {self.tangent!r})"


class Dual2(_Jet):
    """Second-order jet: value, first and second derivative along one direction."""

    def __init__(self, value, first=None, second=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.first = np.zeros_like(self.value) if first is None else np.asarray(first, dtype=np.float64)
        self.second = np.zeros_like(self.value) if second is None else np.asarray(second, dtype=np.float64)

    @property
    def primal(self):
        return self.value

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual2) else Dual2(x)

    def _unary(self, f, df, d2f):
        return Dual2(f, df * self.first, d2f * self.first**2 + df * self.second)

    def __getitem__(self, idx):
        return Dual2(self.value[idx], self.first[idx], self.second[idx])

    def sum(self, axis=None):
        return Dual2(self.value.sum(axis=axis), self.first.sum(axis=axis),
                     self.second.sum(axis=axis))

    def __add__(self, other):
        o = self._lift(other)
        return Dual2(self.value + o.value, self.first + o.first, self.second + o.second)

    def __sub__(self, other):
        o = self._lift(other)
        return Dual2(self.value - o.value, self.first - o.first, self.second - o.second)

    def __mul__(self, other):
        o = self._lift(other)
        return Dual2(self.value * o.value,
                     self.first * o.value + self.value * o.first,
                     self.second * o.value + 2.0 * self.first * o.first + self.value * o.second)

    def __truediv__(self, other):
        o = self._lift(other)
        inv = o._unary(1.0 / o.value, -1.0 / o.value**2, 2.0 / o.value**3)
        return self * inv

    def __pow__(self, p):
        if isinstance(p, _Jet):
            return np.exp(np.log(self) * p)
        p = float(p)
        v = self.value
        return self._unary(v**p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))

    def __repr__(self):
        return f"Dual2({self.value!r}, {self.first!r}, {self.second!r})"


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericFailure("non-finite derivative in forward-mode evaluation")


def grad(f, x):
    """Gradient of a scalar field; ``x`` may carry leading batch axes."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    out = np.empty_like(x)
    for i in range(d):
        tangent = np.zeros_like(x)
        tangent[..., i] = 1.0
        out[..., i] = np.broadcast_to(f(Dual(x, tangent)).tangent, x.shape[:-1])
    _check_finite(out)
    return out


def _second_directional(f, x, direction):
    r = f(Dual2(x, np.broadcast_to(direction, x.shape).copy()))
    return r


def grad_and_hessian(f, x, symmetrize=True):
    """Gradient and Hessian from the same ``d(d+1)/2`` second-order passes."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    lead = x.shape[:-1]
    g = np.empty(lead + (d,))
    h = np.empty(lead + (d, d))
    eye = np.eye(d)
    diag = []
    for i in range(d):
        r = _second_directional(f, x, eye[i])
        g[..., i] = np.broadcast_to(r.first, lead)
        diag.append(np.broadcast_to(r.second, lead))
        h[..., i, i] = diag[i]
    for i in range(d):
        for j in range(i + 1, d):
            r = _second_directional(f, x, eye[i] + eye[j])
            hij = 0.5 * (np.broadcast_to(r.second, lead) - diag[i] - diag[j])
            h[..., i, j] = hij
            h[..., j, i] = hij
    if symmetrize:
        h = 0.5 * (h + np.swapaxes(h, -1, -2))
    _check_finite(g, h)
    return g, h


def hessian(f, x):
    """Symmetric Hessian of a scalar field."""
    return grad_and_hessian(f, x)[1]


def central_fd(f, x, h=1e-5):
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h`` for each coordinate.

    ``f`` may be scalar- or array-valued; the coordinate axis is appended last.
    """
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def relative_error(approx, exact):
    """Norm-wise relative error ``max|approx - exact| / max|exact|``."""
    a = np.asarray(approx, dtype=np.float64)
    b = np.asarray(exact, dtype=np.float64)
    scale = np.max(np.abs(b)) if b.size else 0.0
    err = np.max(np.abs(a - b)) if a.size else 0.0
    return float(err / scale) if scale > 0 else float(err)


def coordinate_relative_error(approx, exact):
    """Largest per-coordinate relative error; coordinates where ``exact`` is 0 must match exactly."""
    a = np.ravel(np.asarray(approx, dtype=np.float64))
    b = np.ravel(np.asarray(exact, dtype=np.float64))
    zero = b == 0.0
    if np.any(a[zero] != 0.0):
        return float("inf")
    if not np.any(~zero):
        return 0.0
    return float(np.max(np.abs(a[~zero] - b[~zero]) / np.abs(b[~zero])))
