"""Exact Wasserstein-1 between equal-size point clouds, and related diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import ResourceLimitError

DEFAULT_CAP = 4096


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted point cloud."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if len(pts) < 1:
            raise ValueError("empirical measure needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("empirical measure has non-finite points")
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return len(self.points)


def _as_measure(a):
    return a if isinstance(a, EmpiricalMeasure) else EmpiricalMeasure(a)


def assignment_cost(cost, perm):
    """Average cost of the assignment ``i -> perm[i]``, correctly rounded."""
    return math.fsum(cost[i, j] for i, j in enumerate(perm)) / len(perm)


def wasserstein1(a, b, cap: int = DEFAULT_CAP) -> float:
    """W1 between two uniform measures with equal counts under Euclidean cost.

    For equal counts and uniform weights the optimal plan is a permutation,
    so the problem is a linear assignment solved exactly.
    """
    a, b = _as_measure(a), _as_measure(b)
    if a.n != b.n:
        raise ValueError(f"point counts differ: {a.n} vs {b.n}")
    if a.points.shape[1] != b.points.shape[1]:
        raise ValueError("point dimensions differ")
    if a.n > cap:
        raise ResourceLimitError(f"{a.n} points exceeds the assignment cap of {cap}")
    cost = cdist(a.points, b.points)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a.n, dtype=int)
    perm[rows] = cols
    return assignment_cost(cost, perm)


def noise_floor(sampler, n, seed1, seed2) -> float:
    """W1 between two independent size-``n`` draws; ``sampler(seed, n)`` returns points."""
    return wasserstein1(sampler(seed1, n), sampler(seed2, n))


def mode_coverage(points, means, radius):
    """Fraction of points whose nearest mean lies within ``radius``, per mean."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    mu = np.asarray(means, dtype=np.float64)
    dist = cdist(pts, mu)
    nearest = np.argmin(dist, axis=1)
    hit = dist[np.arange(len(pts)), nearest] <= radius
    return np.array([np.mean(hit & (nearest == k)) for k in range(len(mu))])
