import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksdtransport import kernel as K
from ksdtransport.diff import central_fd, relative_error
from ksdtransport.kernel import KernelParams

KP = KernelParams()
UNIT = KernelParams(c=1.0, lengthscale=1.0, beta=-0.5)


def test_eval_at_coincident_points_is_one():
    for ell in (0.1, 1.0, 7.0):
        kp = KernelParams(lengthscale=ell)
        assert K.imq_eval(kp, [0.3, -2.0], [0.3, -2.0]) == 1.0


def test_eval_known_values():
    assert K.imq_eval(UNIT, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert K.imq_eval(KP, [0.0, 0.0], [0.1, 0.0]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_grad_vanishes_on_diagonal():
    np.testing.assert_array_equal(K.imq_grad_y(KP, [0.2, 0.4], [0.2, 0.4]), 0.0)
    np.testing.assert_array_equal(K.imq_grad_y_cross_div(KP, [0.2, 0.4], [0.2, 0.4]), 0.0)


def test_grad_matches_fd_unit_case():
    x, y = np.zeros(2), np.array([1.0, 0.0])
    fd = central_fd(lambda v: K.imq_eval(UNIT, x, v), y, 1e-5)
    assert relative_error(K.imq_grad_y(UNIT, x, y), fd) <= 1e-6


def test_hessians_on_diagonal():
    x = np.array([0.5, -0.5])
    np.testing.assert_allclose(K.imq_hess_xy(KP, x, x), 100.0 * np.eye(2), rtol=1e-12)
    np.testing.assert_allclose(K.imq_hess_yy(KP, x, x), -100.0 * np.eye(2), rtol=1e-12)


def test_hess_xy_diagonal_matches_second_order_fd():
    # d^2 k / dx_i dy_i at x = y from a four-point stencil on imq_eval
    x, h = np.array([0.1, 0.2]), 1e-4
    for i in range(2):
        e = np.eye(2)[i] * h
        f = lambda a, b: K.imq_eval(KP, x + a, x + b)
        fd = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4 * h * h)
        assert fd == pytest.approx(100.0, rel=1e-5)


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_cross_div_on_diagonal(d):
    x = np.linspace(-1, 1, d)
    for beta, c, ell in [(-0.5, 1.0, 0.1), (-0.3, 2.0, 0.7)]:
        kp = KernelParams(c=c, lengthscale=ell, beta=beta)
        expected = -2 * beta * d * c ** (2 * (beta - 1)) / ell**2
        assert K.imq_cross_div(kp, x, x) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 4, 8])
def test_derivatives_match_fd(d, rng):
    for _ in range(10):
        x, y = rng.normal(scale=0.1, size=(2, d))
        assert relative_error(K.imq_grad_y(KP, x, y),
                              central_fd(lambda v: K.imq_eval(KP, x, v), y)) <= 1e-5
        assert relative_error(K.imq_grad_x(KP, x, y),
                              central_fd(lambda v: K.imq_eval(KP, v, y), x)) <= 1e-5
        assert relative_error(K.imq_hess_xy(KP, x, y),
                              central_fd(lambda u: K.imq_grad_y(KP, u, y), x)) <= 1e-5
        assert relative_error(K.imq_hess_yy(KP, x, y),
                              central_fd(lambda v: K.imq_grad_y(KP, x, v), y)) <= 1e-5
        assert relative_error(K.imq_grad_y_cross_div(KP, x, y),
                              central_fd(lambda v: K.imq_cross_div(KP, x, v), y)) <= 1e-5


finite = st.floats(-3, 3, allow_nan=False)


@given(st.lists(finite, min_size=4, max_size=4))
def test_symmetry_and_bounds(v):
    x, y = np.array(v[:2]), np.array(v[2:])
    k = K.imq_eval(KP, x, y)
    assert 0.0 < k <= 1.0
    assert k == K.imq_eval(KP, y, x)
    np.testing.assert_allclose(K.imq_grad_x(KP, x, y), -K.imq_grad_y(KP, x, y), atol=1e-15)
    assert K.imq_cross_div(KP, x, y) == pytest.approx(np.trace(K.imq_hess_xy(KP, x, y)), rel=1e-12, abs=1e-12)


@given(st.lists(finite, min_size=4, max_size=4))
def test_radial_terms_agree_with_pointwise(v):
    x, y = np.array(v[:2]), np.array(v[2:])
    t = K.imq_terms(KP, (x - y)[None, :])
    assert t.k[0] == pytest.approx(K.imq_eval(KP, x, y), rel=1e-12)


@pytest.mark.parametrize("bad", [dict(c=0.0), dict(lengthscale=-1.0), dict(beta=-1.0), dict(beta=0.0)])
def test_rejects_invalid_params(bad):
    with pytest.raises(ValueError):
        KernelParams(**bad)
