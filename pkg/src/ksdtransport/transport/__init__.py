"""Parametric transport maps."""
from __future__ import annotations

from ..errors import UnsupportedCapability
from ..reference import STREAM_INIT, make_rng
from .base import TransportMap
from .made import IAF, StableIAF, made_masks
from .mixture import MixtureMap, MixtureReference, mixture_forward_sample
from .polynomial import PolynomialMap
from .relu import ReluMLP

__all__ = [
    "IAF", "StableIAF", "PolynomialMap", "ReluMLP", "MixtureMap", "MixtureReference",
    "TransportMap", "build_map", "init_map", "made_masks", "mixture_forward_sample",
]


def build_map(topology: dict) -> TransportMap:
    """Construct a map from the dictionary produced by ``TransportMap.topology``."""
    t = dict(topology)
    kind = t.pop("kind")
    if kind == "iaf":
        return IAF(**t)
    if kind == "stable-iaf":
        return StableIAF(**t)
    if kind == "polynomial":
        return PolynomialMap(**t)
    if kind == "relu":
        return ReluMLP(**t)
    if kind == "mixture":
        return MixtureMap([build_map(c) for c in t["components"]])
    raise ValueError(f"unknown map kind {kind!r}")


def init_map(tmap: TransportMap, seed: int, scheme: str = "default-random", **pretrain):
    """Initial parameters: ``default-random``, ``identity`` or ``pretrained``.

    ``pretrained`` draws default-random parameters and then fits the map to
    the reference distribution; pass ``reference`` and ``config`` through.
    """
    if scheme == "identity":
        if not tmap.supports_identity and not isinstance(tmap, MixtureMap):
            raise UnsupportedCapability(f"{tmap.kind} map has no exact identity parameterisation")
        return tmap.identity_params(make_rng(seed, STREAM_INIT))
    theta = tmap.random_params(make_rng(seed, STREAM_INIT))
    if scheme == "default-random":
        return theta
    if scheme == "pretrained":
        from ..optimize import pretrain_to_reference
        return pretrain_to_reference(tmap, theta, pretrain["reference"], pretrain["config"])
    raise ValueError(f"unknown init scheme {scheme!r}")
