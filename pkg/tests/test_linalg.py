import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdfp_langevin.linalg import (
    ShapeError,
    as_field,
    make_convolution_map,
    make_dense_map,
    make_gradient_map,
    make_identity_map,
    power_iteration,
)
from pdfp_langevin.models import motion_blur_kernel


def _adjoint_gap(op, rng):
    x = rng.standard_normal(op.domain_shape)
    y = rng.standard_normal(op.range_shape)
    lhs = np.vdot(op.apply(x), y)
    rhs = np.vdot(x, op.adjoint(y))
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def test_as_field_rejects_nonfinite_and_wrong_shape():
    with pytest.raises(ValueError):
        as_field([1.0, np.nan])
    with pytest.raises(ShapeError):
        as_field(np.zeros(3), (4,))


def test_dense_identity_and_diagonal():
    np.testing.assert_array_equal(make_dense_map(np.eye(2)).apply(np.array([1.0, 2.0])), [1.0, 2.0])
    np.testing.assert_array_equal(make_dense_map(np.diag([1.0, 4.0])).apply(np.ones(2)), [1.0, 4.0])


def test_dense_adjoint_and_shape_errors():
    rng = np.random.default_rng(1)
    A = make_dense_map(rng.standard_normal((3, 5)))
    assert _adjoint_gap(A, rng) < 1e-10
    with pytest.raises(ShapeError):
        A.apply(np.zeros(3))
    with pytest.raises(ShapeError):
        A.adjoint(np.zeros(5))


def test_delta_kernel_is_identity():
    A = make_convolution_map(np.ones((1, 1)), (5, 6))
    x = np.random.default_rng(0).standard_normal((5, 6))
    np.testing.assert_allclose(A.apply(x), x, atol=1e-15)


def test_constant_image_is_preserved():
    k = np.random.default_rng(2).uniform(size=(3, 4))
    A = make_convolution_map(k / k.sum(), (8, 9))
    np.testing.assert_allclose(A.apply(np.full((8, 9), 0.37)), 0.37, atol=1e-14)


def test_uniform_kernel_on_one_hot_wraps():
    x = np.zeros((4, 4))
    x[0, 0] = 1.0
    out = make_convolution_map(np.full((3, 3), 1 / 9), (4, 4)).apply(x)
    expected = np.zeros((4, 4))
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            expected[a % 4, b % 4] = 1 / 9
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_convolution_matches_direct_periodic_sum():
    rng = np.random.default_rng(3)
    k = rng.uniform(size=(3, 5))
    k /= k.sum()
    x = rng.standard_normal((9, 11))
    direct = np.zeros_like(x)
    for a in range(3):
        for b in range(5):
            direct += k[a, b] * np.roll(x, (a - 1, b - 2), axis=(0, 1))
    np.testing.assert_allclose(make_convolution_map(k, x.shape).apply(x), direct, atol=1e-14)


def test_convolution_gram_matches_adjoint_of_apply():
    A = make_convolution_map(motion_blur_kernel(7), (16, 16))
    x = np.random.default_rng(4).standard_normal((16, 16))
    np.testing.assert_allclose(A.gram(x), A.adjoint(A.apply(x)), atol=1e-14)


def test_convolution_errors():
    with pytest.raises(ShapeError):
        make_convolution_map(np.full((5, 5), 1 / 25), (4, 4))
    with pytest.raises(ValueError):
        make_convolution_map(np.ones((2, 2)), (4, 4))


def test_gradient_hand_example():
    out = make_gradient_map((2, 2)).apply(np.array([[0.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(out[0], [[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(out[1], np.zeros((2, 2)))


def test_gradient_of_constant_is_zero():
    assert not np.any(make_gradient_map((5, 7)).apply(np.full((5, 7), 3.0)))


def test_gradient_rejects_1d():
    with pytest.raises(ShapeError):
        make_gradient_map((8,))


@pytest.mark.parametrize(
    "op",
    [
        make_gradient_map((8, 8)),
        make_convolution_map(motion_blur_kernel(5, "vertical"), (12, 10)),
        make_identity_map((7,)),
        make_dense_map(np.random.default_rng(5).standard_normal((6, 4))),
    ],
    ids=["gradient", "convolution", "identity", "dense"],
)
def test_adjoint_identity_every_kind(op):
    rng = np.random.default_rng(6)
    for _ in range(5):
        assert _adjoint_gap(op, rng) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31 - 1))
def test_maps_are_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    for op in (make_gradient_map((6, 5)), make_convolution_map(motion_blur_kernel(3), (6, 5))):
        x, y = rng.standard_normal((2, 6, 5))
        lhs = op.apply(alpha * x + beta * y)
        rhs = alpha * op.apply(x) + beta * op.apply(y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_convolution_preserves_mean():
    x = np.random.default_rng(7).uniform(size=(16, 16))
    y = make_convolution_map(motion_blur_kernel(7), x.shape).apply(x)
    assert abs(y.mean() - x.mean()) < 1e-12


def test_power_iteration_examples():
    assert power_iteration(make_identity_map((4,))).value == pytest.approx(1.0)
    assert power_iteration(make_dense_map(np.diag([1.0, 4.0]))).value == pytest.approx(16.0, rel=1e-8)
    lam = power_iteration(make_gradient_map((16, 16)), max_iters=2000, tol=1e-12).value
    assert 7.5 < lam <= 8.0


def test_power_iteration_zero_operator_flags():
    res = power_iteration(make_dense_map(np.zeros((3, 3))))
    assert res.value == 0.0 and not res.converged


@pytest.mark.parametrize("seed", range(5))
def test_power_iteration_matches_gram_eigenvalue(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rng.integers(2, 32), rng.integers(2, 32)))
    # separate the top of the spectrum so the iteration converges quickly
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s[0] = 2.0 * s[1] if s.size > 1 else s[0]
    M = (U * s) @ Vt
    est = power_iteration(make_dense_map(M), max_iters=2000, tol=1e-12).value
    assert est == pytest.approx(np.linalg.eigvalsh(M.T @ M)[-1], rel=1e-8)
