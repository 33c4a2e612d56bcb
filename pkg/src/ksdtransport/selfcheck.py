"""Finite-difference self-checks run by ``ksdtransport check``.

Each check is small and seeded; together they take a few seconds. A check
returns ``(passed, detail)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernel as K
from .diff import central_fd, coordinate_relative_error, relative_error
from .evaluate import assignment_cost, wasserstein1
from .kernel import KernelParams
from .optimize import check_uv_identity
from .reference import GaussianReference, make_rng
from .stein import kld_loss_and_grad, ksd_grad, ksd_objective, ksd_value_and_grad, stein_kernel_up
from .targets import BananaTarget, GaussianTarget, MultimodalTarget, SinusoidalTarget
from .transport import IAF, PolynomialMap, ReluMLP, StableIAF

H = 1e-5
KP = KernelParams()


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _pairs(seed, n=20, d=2, scale=0.1):
    rng = make_rng(seed, 99)
    return rng.normal(scale=scale, size=(n, d)), rng.normal(scale=scale, size=(n, d))


def _worst(errors):
    return max(errors) if errors else 0.0


def check_imq_grad():
    x, y = _pairs(1)
    errs = [relative_error(K.imq_grad_y(KP, a, b), central_fd(lambda v: K.imq_eval(KP, a, v), b, H))
            for a, b in zip(x, y)]
    return _worst(errs) <= 1e-5, f"max rel err {_worst(errs):.2e}"


def check_imq_hess_xy():
    x, y = _pairs(2)
    errs = [relative_error(K.imq_hess_xy(KP, a, b),
                           central_fd(lambda u: K.imq_grad_y(KP, u, b), a, H))
            for a, b in zip(x, y)]
    return _worst(errs) <= 1e-5, f"max rel err {_worst(errs):.2e}"


def check_imq_hess_yy():
    x, y = _pairs(3)
    errs = [relative_error(K.imq_hess_yy(KP, a, b),
                           central_fd(lambda v: K.imq_grad_y(KP, a, v), b, H))
            for a, b in zip(x, y)]
    return _worst(errs) <= 1e-5, f"max rel err {_worst(errs):.2e}"


def check_imq_cross_div():
    x, y = _pairs(4)
    errs = [relative_error(K.imq_cross_div(KP, a, b), np.trace(K.imq_hess_xy(KP, a, b)))
            for a, b in zip(x, y)]
    return _worst(errs) <= 1e-12, f"max rel err vs trace {_worst(errs):.2e}"


def check_imq_cross_div_grad():
    x, y = _pairs(5)
    errs = [relative_error(K.imq_grad_y_cross_div(KP, a, b),
                           central_fd(lambda v: K.imq_cross_div(KP, a, v), b, H))
            for a, b in zip(x, y)]
    return _worst(errs) <= 1e-5, f"max rel err {_worst(errs):.2e}"


def check_stein_anchor():
    v = stein_kernel_up(GaussianTarget.standard(2), KP, [0.0, 0.0], [0.0, 0.0])
    return abs(v - 200.0) <= 1e-9, f"u_p(0, 0) = {v!r}"


def check_target_scores():
    rng = make_rng(6, 99)
    errs = []
    for t in (BananaTarget(), SinusoidalTarget(), MultimodalTarget()):
        pts = rng.normal(scale=0.5, size=(10, 2))
        if isinstance(t, SinusoidalTarget):
            pts[:, 1] = np.sin(t.b * pts[:, 0]) + rng.normal(scale=t.eta2, size=10)
        for p in pts:
            errs.append(relative_error(t.score(p), central_fd(t.log_density, p, H)))
    return _worst(errs) <= 1e-5, f"max rel err {_worst(errs):.2e}"


def check_target_jacobians():
    rng = make_rng(7, 99)
    errs = []
    for t in (BananaTarget(), MultimodalTarget(), SinusoidalTarget()):
        for p in rng.normal(scale=0.5, size=(10, 2)):
            errs.append(relative_error(t.score_jacobian(p), central_fd(t.score, p, H)))
    return _worst(errs) <= 1e-4, f"max rel err {_worst(errs):.2e}"


def _vjp_check(tmap, theta, x, tol, seed):
    v = make_rng(seed, 98).normal(size=(len(x), tmap.output_dim))
    fd = central_fd(lambda th: float(np.sum(v * tmap.forward(th, x))), theta, H)
    err = relative_error(tmap.vjp_params(theta, x, v), fd)
    return err <= tol, f"rel err {err:.2e}"


def check_iaf_vjp():
    m = IAF(2, 8)
    rng = make_rng(8, 99)
    return _vjp_check(m, m.random_params(rng), rng.normal(size=(5, 2)), 1e-5, 8)


def check_stable_iaf_logdet():
    m = StableIAF(2, 8)
    rng = make_rng(9, 99)
    theta, x = m.random_params(rng), rng.normal(size=(5, 2))
    fd = central_fd(lambda th: float(np.sum(m.log_det_jacobian(th, x))), theta, H)
    err = relative_error(m.grad_params_log_det(theta, x), fd)
    return err <= 1e-5, f"rel err {err:.2e}"


def check_polynomial_vjp():
    m = PolynomialMap(2)
    rng = make_rng(10, 99)
    return _vjp_check(m, m.random_params(rng), rng.normal(size=(5, 2)), 1e-7, 10)


def check_relu_vjp():
    m = ReluMLP(4, 2, (8, 8))
    rng = make_rng(11, 99)
    x = rng.normal(size=(5, 4)) + rng.uniform(-1e-3, 1e-3, size=(5, 4))
    return _vjp_check(m, m.random_params(rng), x, 1e-4, 11)


def check_ksd_gradient():
    m = IAF(2, 8)
    rng = make_rng(12, 99)
    theta, x = m.random_params(rng), rng.normal(size=(10, 2))
    t = BananaTarget()
    g = ksd_grad(t, KP, m, theta, x).grad
    fd = central_fd(lambda th: ksd_objective(t, KP, m, th, x), theta, 1e-4)
    err = coordinate_relative_error(g, fd)
    return err <= 1e-5, f"max per-coordinate rel err {err:.2e}"


def check_kld_gradient():
    m = IAF(2, 8)
    rng = make_rng(13, 99)
    theta, x = m.random_params(rng), rng.normal(size=(10, 2))
    t, ref = BananaTarget(), GaussianReference(2)
    _, g = kld_loss_and_grad(m, ref, t, theta, x)
    fd = central_fd(lambda th: kld_loss_and_grad(m, ref, t, th, x)[0], theta, H)
    err = relative_error(g.grad, fd)
    return err <= 1e-5, f"rel err {err:.2e}"


def check_uv_identity_holds():
    m = IAF(2, 8)
    rng = make_rng(14, 99)
    step = ksd_value_and_grad(BananaTarget(), KP, m, m.random_params(rng), rng.normal(size=(30, 2)))
    try:
        check_uv_identity(step)
    except AssertionError as exc:
        return False, str(exc)
    return True, "n^2 V = n(n-1) U + trace"


def check_emd_brute_force():
    rng = make_rng(15, 99)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        cost = np.linalg.norm(a[:, None] - b[None], axis=-1)
        brute = min(assignment_cost(cost, p) for p in itertools.permutations(range(n)))
        worst = max(worst, abs(wasserstein1(a, b) - brute))
    return worst == 0.0, f"max abs diff {worst:.1e}"


CHECKS: list[tuple[str, Callable]] = [
    ("kernel.grad_y_vs_fd", check_imq_grad),
    ("kernel.hess_xy_vs_fd", check_imq_hess_xy),
    ("kernel.hess_yy_vs_fd", check_imq_hess_yy),
    ("kernel.cross_div_vs_trace", check_imq_cross_div),
    ("kernel.cross_div_grad_vs_fd", check_imq_cross_div_grad),
    ("stein.anchor_200", check_stein_anchor),
    ("targets.score_vs_fd", check_target_scores),
    ("targets.jacobian_vs_fd", check_target_jacobians),
    ("transport.iaf_vjp_vs_fd", check_iaf_vjp),
    ("transport.stable_iaf_logdet_grad_vs_fd", check_stable_iaf_logdet),
    ("transport.polynomial_vjp_vs_fd", check_polynomial_vjp),
    ("transport.relu_vjp_vs_fd", check_relu_vjp),
    ("stein.ksd_grad_vs_fd", check_ksd_gradient),
    ("stein.kld_grad_vs_fd", check_kld_gradient),
    ("stein.uv_identity", check_uv_identity_holds),
    ("eval.emd_vs_brute_force", check_emd_brute_force),
]


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        if names is not None and name not in names:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
