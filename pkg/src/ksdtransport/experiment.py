"""Turn an ``ExperimentConfig`` into targets, maps, trained parameters and metrics."""
from __future__ import annotations

import dataclasses

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, UnsupportedCapability
from .evaluate import mode_coverage, wasserstein1
from .hmc import hmc_sample
from .optimize import TrainConfig, check_compatible, pretrain_to_reference, train
from .reference import STREAM_EVAL, STREAM_TARGET, GaussianReference, make_reference, make_rng
from .stein import ksd_u, ksd_v
from .targets import MultimodalTarget, make_target
from .transport import MixtureReference, build_map, init_map


def build_target(cfg: ExperimentConfig):
    try:
        return make_target(cfg.target.kind, cfg.target.params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"target: {exc}") from exc


def build_reference(cfg: ExperimentConfig):
    ref = cfg.reference
    try:
        if ref.kind == "gaussian-mixture":
            params = dict(ref.params)
            means = params.pop("means")
            weights = params.pop("weights", None)
            scale = params.pop("scale", 1.0)
            if params:
                raise ConfigError(f"unknown reference params: {sorted(params)}")
            comps = [GaussianReference(ref.dim, tuple(m), scale) for m in means]
            return MixtureReference(comps, weights)
        return make_reference(ref.kind, ref.dim, ref.params)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"reference: {exc}") from exc


def _base_dim(reference):
    return getattr(reference, "base_dim", reference.dim)


def build_transport(cfg: ExperimentConfig, reference, target):
    shape = dict(cfg.map.shape)
    p, d = _base_dim(reference), target.dim
    try:
        if cfg.map.kind == "mixture":
            if not isinstance(reference, MixtureReference):
                raise ConfigError("a mixture map needs a gaussian-mixture reference")
            base = shape.pop("base", "iaf")
            comp = {"kind": base, **_component_shape(base, p, d, shape)}
            topo = {"kind": "mixture", "components": [comp] * len(reference.references)}
        else:
            if isinstance(reference, MixtureReference):
                raise ConfigError("a gaussian-mixture reference needs a mixture map")
            topo = {"kind": cfg.map.kind, **_component_shape(cfg.map.kind, p, d, shape)}
        return build_map(topo)
    except TypeError as exc:
        raise ConfigError(f"map shape: {exc}") from exc


def _component_shape(kind, p, d, shape):
    if kind == "relu":
        out = {"input_dim": p, "output_dim": d, **shape}
        if "hidden" in out:
            out["hidden"] = tuple(out["hidden"])
        return out
    if p != d:
        raise ConfigError(f"{kind} map needs reference dim {p} to equal target dim {d}")
    return {"dim": d, **shape}


def pretrain_config(cfg: ExperimentConfig) -> TrainConfig:
    return dataclasses.replace(cfg.train_config(), iterations=cfg.map.pretrain_iterations,
                               objective=cfg.map.pretrain_objective)


def initial_theta(cfg: ExperimentConfig, tmap, reference):
    """Initial parameters; ``init: pretrained`` or ``pretrain: true`` fits the reference first."""
    scheme = "default-random" if cfg.map.init == "pretrained" else cfg.map.init
    theta = init_map(tmap, cfg.seeds.train, scheme)
    if cfg.map.pretrain or cfg.map.init == "pretrained":
        if isinstance(reference, MixtureReference):
            raise UnsupportedCapability("pretraining is not available for mixture references")
        pcfg = pretrain_config(cfg)
        check_compatible(tmap, pcfg.objective)
        theta = pretrain_to_reference(tmap, theta, reference, pcfg)
    return theta


@dataclasses.dataclass
class TrainedRun:
    target: object
    reference: object
    tmap: object
    theta: np.ndarray
    report: object


def run_training(cfg: ExperimentConfig, callback=None) -> TrainedRun:
    target = build_target(cfg)
    reference = build_reference(cfg)
    tmap = build_transport(cfg, reference, target)
    tcfg = cfg.train_config()
    check_compatible(tmap, tcfg.objective)
    theta0 = initial_theta(cfg, tmap, reference)
    report = train(tmap, theta0, target, reference, tcfg, callback=callback)
    return TrainedRun(target, reference, tmap, report.theta, report)


def pushforward_samples(tmap, theta, reference, n, seed):
    x = reference.sample(make_rng(seed, STREAM_EVAL), n)
    return tmap.forward(theta, x)


def _even_subset(points, n):
    if len(points) < n:
        raise ConfigError(f"gold standard produced {len(points)} draws, need {n}")
    idx = (np.arange(n) * len(points)) // n
    return points[idx]


def gold_samples(cfg: ExperimentConfig, target, n, seed):
    """Independent draws (analytic) or thinned post-warmup HMC draws from the target."""
    if cfg.eval.gold_standard == "analytic":
        if not hasattr(target, "sample"):
            raise UnsupportedCapability(f"target {cfg.target.kind!r} has no exact sampler; use hmc")
        return target.sample(make_rng(seed, STREAM_TARGET), n)
    chain = hmc_sample(target, cfg.hmc.config(seed))
    return _even_subset(chain.samples, n)


def evaluate_run(cfg: ExperimentConfig, target, reference, tmap, theta, gold=None, with_floor=True):
    """Metrics for a trained map. ``gold`` overrides the configured gold standard."""
    n = cfg.eval.w1_samples
    seed = cfg.seeds.eval
    kp = cfg.kernel.params()
    ys = pushforward_samples(tmap, theta, reference, n, seed)
    floor = None
    if gold is None:
        gold = gold_samples(cfg, target, n, seed)
        if with_floor:
            # W1 between the seed and seed + 1 gold draws; reuse the first
            floor = wasserstein1(gold, gold_samples(cfg, target, n, seed + 1))
    gold = np.asarray(gold, dtype=np.float64)
    if len(gold) != n:
        gold = _even_subset(gold, n)
    v_stat = ksd_v(target, kp, ys)
    metrics = {
        "w1": wasserstein1(ys, gold),
        "w1_samples": n,
        "ksd_u": ksd_u(target, kp, ys).value,
        "ksd_v": v_stat.value,
        "ksd_discrepancy": v_stat.discrepancy,
        "noise_floor": floor,
        "mode_coverage": None,
    }
    if isinstance(target, MultimodalTarget):
        metrics["mode_coverage"] = [float(v) for v in
                                    mode_coverage(ys, target.means, cfg.eval.coverage_radius)]
    return metrics, ys
