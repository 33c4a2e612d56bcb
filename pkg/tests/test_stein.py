import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from ksdtransport.diff import central_fd, coordinate_relative_error, relative_error
from ksdtransport.errors import NumericFailure
from ksdtransport.kernel import KernelParams
from ksdtransport.optimize import check_uv_identity
from ksdtransport.reference import GaussianReference, make_rng
from ksdtransport.stein import (kld_loss_and_grad, ksd_grad, ksd_objective, ksd_u, ksd_v,
                                ksd_value_and_grad, stein_kernel_up, stein_matrix)
from ksdtransport.targets import BananaTarget, GaussianTarget, MultimodalTarget
from ksdtransport.transport import IAF, PolynomialMap, ReluMLP, StableIAF, init_map

KP = KernelParams()
STD2 = GaussianTarget.standard(2)


def symbolic_up_1d(y0, y1, c=1, ell=1, beta=sp.Rational(-1, 2)):
    y, yp = sp.symbols("y yp", real=True)
    k = (c**2 + (y - yp) ** 2 / ell**2) ** beta
    s = lambda v: -v
    u = s(y) * k * s(yp) + s(y) * sp.diff(k, yp) + sp.diff(k, y) * s(yp) + sp.diff(k, y, yp)
    return float(sp.N(u.subs({y: y0, yp: y1}), 30))


def test_anchor_value():
    assert stein_kernel_up(STD2, KP, [0.0, 0.0], [0.0, 0.0]) == pytest.approx(200.0, abs=1e-9)


def test_one_dimensional_value_against_symbolic_oracle():
    kp = KernelParams(c=1.0, lengthscale=1.0, beta=-0.5)
    got = stein_kernel_up(GaussianTarget.standard(1), kp, [0.5], [-0.5])
    assert got == pytest.approx(symbolic_up_1d(0.5, -0.5), rel=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_symmetry(v):
    t = BananaTarget()
    a, b = np.array(v[:2]), np.array(v[2:])
    assert stein_kernel_up(t, KP, a, b) == stein_kernel_up(t, KP, b, a)


def test_matrix_matches_pairwise():
    t = BananaTarget()
    y = make_rng(0, 1).normal(scale=0.3, size=(6, 2))
    mat = stein_matrix(KP, y, t.score(y))
    for i in range(6):
        for j in range(6):
            assert mat[i, j] == pytest.approx(stein_kernel_up(t, KP, y[i], y[j]), rel=1e-12)


def test_v_statistic_examples():
    assert ksd_v(STD2, KP, [[0.0, 0.0]]).value == pytest.approx(200.0, abs=1e-9)
    y = np.array([[0.3, -0.2]])
    assert ksd_v(STD2, KP, np.vstack([y, y])).value == pytest.approx(ksd_v(STD2, KP, y).value, rel=1e-12)


def test_v_statistic_nonnegative_and_gram_psd():
    rng = make_rng(1, 1)
    for _ in range(100):
        y = rng.normal(size=(int(rng.integers(1, 20)), 2))
        assert ksd_v(STD2, KP, y).value >= 0.0
    for _ in range(20):
        y = rng.normal(size=(6, 2))
        gram = stein_matrix(KP, y, STD2.score(y))
        assert np.linalg.eigvalsh(gram).min() > -1e-8


def test_uv_identity():
    rng = make_rng(2, 1)
    for n in (2, 5, 40):
        y = rng.normal(size=(n, 2))
        u, v = ksd_u(STD2, KP, y).value, ksd_v(STD2, KP, y).value
        diag = sum(stein_kernel_up(STD2, KP, p, p) for p in y)
        assert n * n * v == pytest.approx(n * (n - 1) * u + diag, rel=1e-9)


def test_u_positive_under_large_shift():
    rng = make_rng(3, 1)
    assert all(ksd_u(STD2, KP, rng.normal(3.0, 1.0, size=(100, 2))).value > 0 for _ in range(100))


def test_u_unbiased_small():
    rng = make_rng(4, 1)
    vals = [ksd_u(STD2, KP, rng.normal(size=(50, 2))).value for _ in range(100)]
    assert abs(np.mean(vals)) < 4 * np.std(vals, ddof=1) / np.sqrt(len(vals))


def test_v_shrinks_with_n():
    kp = KernelParams(lengthscale=1.0)
    rng = make_rng(5, 1)
    small = np.median([ksd_v(STD2, kp, rng.normal(size=(100, 2))).value for _ in range(10)])
    large = np.median([ksd_v(STD2, kp, rng.normal(size=(1000, 2))).value for _ in range(10)])
    assert large < small


def test_size_errors():
    with pytest.raises(ValueError):
        ksd_u(STD2, KP, [[0.0, 0.0]])
    with pytest.raises(ValueError):
        ksd_v(STD2, KP, np.zeros((0, 2)))
    with pytest.raises(ValueError):
        ksd_v(STD2, KP, np.zeros((3, 3)))


MAPS = [IAF(2, 8), StableIAF(2, 8), PolynomialMap(2), ReluMLP(2, 2, (8, 8))]


@pytest.mark.parametrize("tmap", MAPS, ids=lambda m: m.kind)
def test_gradient_matches_fd_per_coordinate(tmap):
    rng = make_rng(6, 1)
    theta = tmap.random_params(rng)
    x = rng.normal(size=(10, 2))
    t = BananaTarget()
    g = ksd_grad(t, KP, tmap, theta, x).grad
    fd = central_fd(lambda th: ksd_objective(t, KP, tmap, th, x), theta, 1e-4)
    assert coordinate_relative_error(g, fd) <= 1e-5


def test_gradient_at_identity_for_reference_target():
    m = IAF(2, 8)
    theta = init_map(m, 0, "identity")
    x = make_rng(7, 1).normal(size=(12, 2))
    g = ksd_grad(STD2, KP, m, theta, x).grad
    fd = central_fd(lambda th: ksd_objective(STD2, KP, m, th, x), theta, 1e-4)
    assert coordinate_relative_error(g, fd) <= 1e-5


def test_v_gradient_matches_fd():
    m = IAF(2, 8)
    rng = make_rng(8, 1)
    theta, x = m.random_params(rng), rng.normal(size=(10, 2))
    g = ksd_grad(MultimodalTarget(), KP, m, theta, x, statistic="V").grad
    fd = central_fd(lambda th: ksd_objective(MultimodalTarget(), KP, m, th, x, "V"), theta, 1e-5)
    assert relative_error(g, fd) <= 1e-6


def test_directional_derivative_single_parameter():
    m = StableIAF(2, 8)
    rng = make_rng(9, 1)
    theta, x = m.random_params(rng), rng.normal(size=(10, 2))
    g = ksd_grad(BananaTarget(), KP, m, theta, x).grad
    k = 17
    f = lambda a: ksd_objective(BananaTarget(), KP, m, np.where(np.arange(m.param_count) == k, a, theta), x)
    fd = (f(theta[k] + 1e-4) - f(theta[k] - 1e-4)) / 2e-4
    assert g[k] == pytest.approx(fd, rel=1e-5)


def test_constant_map_gradient_is_sparse():
    m = ReluMLP(2, 2, (4,))
    theta = np.zeros(m.param_count)
    theta[-2:] = [0.3, -0.1]
    x = make_rng(10, 1).normal(size=(8, 2))
    g = ksd_grad(STD2, KP, m, theta, x).grad
    # only the final bias feeds the constant output
    assert np.all(g[:-2] == 0.0)


def test_gradient_permutation_invariant():
    m = IAF(2, 8)
    rng = make_rng(11, 1)
    theta, x = m.random_params(rng), rng.normal(size=(30, 2))
    perm = rng.permutation(30)
    g1 = ksd_grad(BananaTarget(), KP, m, theta, x).grad
    g2 = ksd_grad(BananaTarget(), KP, m, theta, x[perm]).grad
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-12 * np.abs(g1).max())


def test_step_satisfies_uv_identity():
    m = IAF(2, 8)
    rng = make_rng(12, 1)
    check_uv_identity(ksd_value_and_grad(BananaTarget(), KP, m, m.random_params(rng), rng.normal(size=(25, 2))))


def test_non_finite_score_reported():
    m = IAF(2, 4)
    theta = np.zeros(m.param_count)
    class Bad(GaussianTarget):
        def score_and_jacobian(self, y):
            s, j = super().score_and_jacobian(y)
            s[0, 0] = np.inf
            return s, j
    with np.errstate(invalid="ignore"), pytest.raises(NumericFailure):
        ksd_grad(Bad((0.0, 0.0), (1.0, 1.0)), KP, m, theta, np.eye(2) * 0.1 + 0.05)


def test_kld_gradient_zero_at_identity_optimum():
    m = IAF(2, 8)
    ref = GaussianReference(2)
    # symmetric batch: the sample moments equal the population moments
    x = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    for theta in (np.zeros(m.param_count), init_map(m, 0, "identity")):
        _, g = kld_loss_and_grad(m, ref, STD2, theta, x)
        np.testing.assert_allclose(g.grad, 0.0, atol=1e-8)


def test_kld_gradient_matches_fd():
    m = PolynomialMap(2)
    rng = make_rng(13, 1)
    theta, x = m.random_params(rng), rng.normal(scale=0.5, size=(10, 2))
    _, g = kld_loss_and_grad(m, GaussianReference(2), BananaTarget(), theta, x)
    fd = central_fd(lambda th: kld_loss_and_grad(m, GaussianReference(2), BananaTarget(), th, x)[0], theta)
    assert relative_error(g.grad, fd) <= 1e-5


def test_kld_full_batch_descent_on_mean_shift():
    m = IAF(2, 4)
    target = GaussianTarget((1.0, -2.0), (1.0, 1.0))
    x = make_rng(14, 1).normal(size=(200, 2))
    theta = init_map(m, 0, "identity")
    losses = []
    for _ in range(200):
        loss, g = kld_loss_and_grad(m, GaussianReference(2), target, theta, x)
        losses.append(loss)
        theta = theta - 0.05 * g.grad
    assert losses[-1] < losses[0] - 1.0
