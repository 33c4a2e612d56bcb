"""Experiment configuration: one JSON document per run, strictly validated.

Every section is a frozen dataclass. Unknown keys anywhere raise
``ConfigError`` so a typo never silently falls back to a default. The only
environment override is ``OUTPUT_DIR``.
"""
from __future__ import annotations

import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field

from .errors import ConfigError
from .hmc import HmcConfig
from .kernel import KernelParams
from .optimize import OBJECTIVES, OPTIMIZERS, TrainConfig

MAP_KINDS = ("iaf", "stable-iaf", "polynomial", "relu", "mixture")
INIT_SCHEMES = ("default-random", "identity", "pretrained")


@dataclass(frozen=True)
class TargetSection:
    kind: str = "banana"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReferenceSection:
    """``kind`` is gaussian, laplace, gmm, or gaussian-mixture (one Gaussian per mixture component)."""

    kind: str = "gaussian"
    params: dict = field(default_factory=dict)
    dim: int = 2


@dataclass(frozen=True)
class MapSection:
    kind: str = "iaf"
    shape: dict = field(default_factory=dict)
    init: str = "default-random"
    pretrain: bool = False
    pretrain_iterations: int = 5000
    pretrain_objective: str = "kld"

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise ConfigError(f"unknown map kind {self.kind!r}")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"unknown init scheme {self.init!r}")
        if self.pretrain_objective not in OBJECTIVES:
            raise ConfigError(f"unknown pretrain objective {self.pretrain_objective!r}")


@dataclass(frozen=True)
class KernelSection:
    c: float = 1.0
    ell: float = 0.1
    beta: float = -0.5

    def params(self) -> KernelParams:
        try:
            return KernelParams(self.c, self.ell, self.beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class OptimizerSection:
    kind: str = "adam"
    lr: float = 1e-3

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ConfigError("learning rate must be positive")


@dataclass(frozen=True)
class TrainSection:
    iterations: int = 10_000
    batch: int = 100
    sampling: str = "mc"


@dataclass(frozen=True)
class EvalSection:
    w1_samples: int = 2000
    gold_standard: str = "analytic"
    coverage_radius: float = 0.6

    def __post_init__(self):
        if self.gold_standard not in ("analytic", "hmc"):
            raise ConfigError(f"gold_standard must be 'analytic' or 'hmc', got {self.gold_standard!r}")
        if self.w1_samples < 2:
            raise ConfigError("w1_samples must be at least 2")


@dataclass(frozen=True)
class HmcSection:
    warmup: int = 1000
    samples: int = 5000
    target_accept: float = 0.8
    leapfrog_steps: int = 32
    jitter: float = 0.2
    step_size: float = 0.1
    thin: int = 1
    n_chains: int = 1

    def config(self, seed) -> HmcConfig:
        return HmcConfig(seed=seed, **dataclasses.asdict(self))


@dataclass(frozen=True)
class SeedSection:
    train: int = 0
    eval: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    target: TargetSection = field(default_factory=TargetSection)
    reference: ReferenceSection = field(default_factory=ReferenceSection)
    map: MapSection = field(default_factory=MapSection)
    objective: str = "ksd-u"
    kernel: KernelSection = field(default_factory=KernelSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    hmc: HmcSection = field(default_factory=HmcSection)
    seeds: SeedSection = field(default_factory=SeedSection)
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.train.iterations,
            batch_size=self.train.batch,
            learning_rate=self.optimizer.lr,
            objective=self.objective,
            seed=self.seeds.train,
            sampling=self.train.sampling,
            optimizer=self.optimizer.kind,
            kernel=self.kernel.params(),
        )

    def to_dict(self):
        return dataclasses.asdict(self)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=SeedSection(seed, seed))

    def with_output_dir(self, path: str) -> "ExperimentConfig":
        return dataclasses.replace(self, output_dir=str(path))


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kind = hints[name]
        path = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(kind):
            kwargs[name] = _build(kind, value, path)
        else:
            kwargs[name] = _coerce(kind, value, path)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _coerce(kind, value, path):
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is str:
        ok = isinstance(value, str)
    elif kind is dict:
        ok = isinstance(value, dict)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{path}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def parse_config(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "")
    env = os.environ.get("OUTPUT_DIR")
    return cfg.with_output_dir(env) if env else cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
