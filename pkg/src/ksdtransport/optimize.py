"""Stochastic optimisers and the training / pretraining loops."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericFailure, UnsupportedCapability
from .kernel import KernelParams
from .reference import STREAM_TRAIN, QmcGrid, make_rng, qmc_sample
from .stein import kld_loss_and_grad, ksd_value_and_grad

OPTIMIZERS = ("adam", "sgd", "rmsprop", "adagrad")
OBJECTIVES = ("ksd-u", "ksd-v", "kld")


@dataclass(frozen=True)
class OptimizerState:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rmsprop_decay: float = 0.99
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def create(cls, kind, lr, param_count, **hyper):
        if kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {kind!r}")
        return cls(kind=kind, lr=lr, m=np.zeros(param_count), v=np.zeros(param_count), **hyper)


def step(state: OptimizerState, theta, grad):
    """One update; returns ``(new_theta, new_state)`` and never mutates inputs."""
    g = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NumericFailure("non-finite gradient passed to optimizer")
    theta = np.asarray(theta, dtype=np.float64)
    t = state.step_count + 1
    if state.kind == "sgd":
        return theta - state.lr * g, replace(state, step_count=t)
    if state.kind == "adam":
        m = state.beta1 * state.m + (1.0 - state.beta1) * g
        v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        return new, replace(state, step_count=t, m=m, v=v)
    if state.kind == "rmsprop":
        v = state.rmsprop_decay * state.v + (1.0 - state.rmsprop_decay) * g * g
        return theta - state.lr * g / (np.sqrt(v) + state.eps), replace(state, step_count=t, v=v)
    if state.kind == "adagrad":
        v = state.v + g * g
        return theta - state.lr * g / (np.sqrt(v) + state.eps), replace(state, step_count=t, v=v)
    raise ConfigError(f"unknown optimizer {state.kind!r}")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 10_000
    batch_size: int = 100
    learning_rate: float = 1e-3
    objective: str = "ksd-u"
    seed: int = 0
    sampling: str = "mc"
    optimizer: str = "adam"
    kernel: KernelParams = field(default_factory=KernelParams)
    check_identity: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.batch_size < 2:
            raise ConfigError("batch size must be at least 2")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.sampling not in ("mc", "qmc"):
            raise ConfigError(f"unknown sampling {self.sampling!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    theta: np.ndarray
    loss_trace: list
    wall_clock: float
    evaluations: int


class CountingTarget:
    """Wraps a target and counts points at which gradient-bearing quantities were evaluated."""

    def __init__(self, target):
        self.inner = target
        self.dim = target.dim
        self.evaluations = 0

    def log_density(self, y):
        return self.inner.log_density(y)

    def score(self, y):
        self.evaluations += int(np.prod(np.shape(y)[:-1]))
        return self.inner.score(y)

    def score_jacobian(self, y):
        return self.inner.score_jacobian(y)

    def score_and_jacobian(self, y):
        self.evaluations += int(np.prod(np.shape(y)[:-1]))
        return self.inner.score_and_jacobian(y)


def check_uv_identity(step_result, rtol=1e-9):
    """n^2 V = n(n-1) U + sum_i u(y_i, y_i), checked relative to the magnitudes involved."""
    n = step_result.n
    lhs = n**2 * step_result.v_stat
    rhs = n * (n - 1) * step_result.u_stat + step_result.diag_sum
    scale = max(abs(lhs), abs(n * (n - 1) * step_result.u_stat), abs(step_result.diag_sum), 1e-300)
    if abs(lhs - rhs) > rtol * scale:
        raise AssertionError(f"U/V identity violated: {lhs} vs {rhs}")


def _batch_sampler(reference, config):
    rng = make_rng(config.seed, STREAM_TRAIN)
    if config.sampling == "qmc":
        grid = QmcGrid.for_batch(reference, config.batch_size)
        return lambda: qmc_sample(grid, rng, config.batch_size)
    return lambda: reference.sample(rng, config.batch_size)


def check_compatible(tmap, objective):
    if objective == "kld" and not tmap.has_log_det:
        raise UnsupportedCapability(
            f"objective 'kld' needs a log-determinant; the {tmap.kind} map does not provide one")


def train(tmap, theta0, target, reference, config: TrainConfig, callback=None) -> TrainReport:
    """Stochastic optimisation of the map parameters.

    KSD objectives differentiate the U (``ksd-u``) or V (``ksd-v``)
    statistic, but the recorded loss is always the V statistic, which is
    nonnegative and comparable across runs. The KLD objective records its
    own loss.
    """
    check_compatible(tmap, config.objective)
    counted = CountingTarget(target)
    draw = _batch_sampler(reference, config)
    state = OptimizerState.create(config.optimizer, config.learning_rate, tmap.param_count)
    theta = np.array(theta0, dtype=np.float64)
    trace = []
    start = time.perf_counter()
    for it in range(config.iterations):
        x = draw()
        try:
            if config.objective == "kld":
                loss, g = kld_loss_and_grad(tmap, reference, counted, theta, x)
                grad = g.grad
            else:
                res = ksd_value_and_grad(counted, config.kernel, tmap, theta, x,
                                         "U" if config.objective == "ksd-u" else "V")
                if config.check_identity:
                    check_uv_identity(res)
                loss, grad = res.v_stat, res.grad
            theta, state = step(state, theta, grad)
        except NumericFailure as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc
        trace.append((it, float(loss)))
        if callback is not None:
            callback(it, theta, loss)
    return TrainReport(theta, trace, time.perf_counter() - start, counted.evaluations)


def pretrain_to_reference(tmap, theta0, reference, config: TrainConfig):
    """Fit the map so that its pushforward matches the reference itself.

    When the map changes dimension (a rectifier network on a 4-d input
    with 2-d output, say) the matching standard law on the output space is
    used as the target.
    """
    target = reference.as_target(tmap.output_dim)
    return train(tmap, theta0, target, reference, config).theta
