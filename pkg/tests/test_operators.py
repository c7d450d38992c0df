import numpy as np
import pytest

from alm_rates.core.operators import (
    LinearOperator,
    OperatorSpec,
    first_difference,
    fractional_gram_apply,
    gaussian_kernel,
    make_test_operator,
    svd,
)
from alm_rates.errors import DimensionMismatchError, OperatorSpecError


def test_diagonal_apply_and_adjoint():
    op = LinearOperator.diagonal(np.array([1.0, 0.5]))
    np.testing.assert_allclose(op.apply(np.array([2.0, 2.0])), [2.0, 1.0])
    np.testing.assert_allclose(op.adjoint_apply(np.array([2.0, 2.0])), [2.0, 1.0])


def test_identity_apply():
    op = LinearOperator.diagonal(np.ones(3))
    np.testing.assert_array_equal(op(np.array([3.0, -1.0, 0.0])), [3.0, -1.0, 0.0])
    assert op.is_identity()


def test_dense_apply_and_adjoint():
    op = LinearOperator.dense(np.array([[1.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_allclose(op.apply(np.array([1.0, 1.0])), [2.0, 1.0])
    np.testing.assert_allclose(op.adjoint_apply(np.array([1.0, 0.0])), [1.0, 1.0])


def test_apply_rejects_wrong_length():
    op = LinearOperator.dense(np.ones((2, 3)))
    with pytest.raises(DimensionMismatchError):
        op.apply(np.ones(2))
    with pytest.raises(DimensionMismatchError):
        op.adjoint_apply(np.ones(3))


@pytest.mark.parametrize(
    "spec",
    [
        OperatorSpec(kind="dense", size=5, cols=4, seed=2),
        OperatorSpec(kind="diagonal", size=7, decay=1.5),
        OperatorSpec(kind="convolution", size=30, width=2.0),
    ],
)
def test_adjoint_consistency(spec):
    op = make_test_operator(spec)
    rng = np.random.default_rng(0)
    for _ in range(100):
        u = rng.standard_normal(op.cols)
        g = rng.standard_normal(op.rows)
        lhs = float(op.apply(u) @ g)
        rhs = float(u @ op.adjoint_apply(g))
        assert abs(lhs - rhs) <= 1e-12 * (1.0 + np.linalg.norm(u) * np.linalg.norm(g))


def test_convolution_matches_its_dense_matrix():
    op = make_test_operator(OperatorSpec(kind="convolution", size=12, width=1.0))
    u = np.random.default_rng(3).standard_normal(12)
    np.testing.assert_allclose(op.apply(u), op.matrix @ u, atol=1e-14)
    np.testing.assert_allclose(op.adjoint_apply(u), op.matrix.T @ u, atol=1e-14)


def test_svd_of_diagonal():
    f = svd(LinearOperator.diagonal(np.array([3.0, 1.0])))
    np.testing.assert_allclose(f.singular_values, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(f.left), np.eye(2))
    np.testing.assert_allclose(np.abs(f.right), np.eye(2))


def test_svd_sorts_diagonal_singular_values():
    f = svd(LinearOperator.diagonal(np.array([0.5, -2.0, 1.0])))
    np.testing.assert_allclose(f.singular_values, [2.0, 1.0, 0.5])
    np.testing.assert_allclose(f.reconstruct(), np.diag([0.5, -2.0, 1.0]), atol=1e-15)


def test_svd_of_permutation():
    f = svd(LinearOperator.dense(np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(f.singular_values, [1.0, 1.0])


def test_svd_reconstruction(random_square):
    f = svd(random_square)
    assert np.all(np.diff(f.singular_values) <= 0)
    assert np.linalg.norm(f.reconstruct() - random_square.matrix) <= 1e-10


def test_fractional_gram_diagonal_half(diagonal3):
    out = fractional_gram_apply(svd(diagonal3), 0.5, np.ones(3))
    np.testing.assert_allclose(out, [1.0, 0.5, 1.0 / 3.0])


def test_fractional_gram_zero_is_identity_on_full_rank(random_square):
    p = np.random.default_rng(1).standard_normal(8)
    np.testing.assert_allclose(fractional_gram_apply(svd(random_square), 0.0, p), p, atol=1e-12)


def test_fractional_gram_zero_projects_rank_deficient():
    op = LinearOperator.diagonal(np.array([1.0, 0.0]))
    np.testing.assert_allclose(fractional_gram_apply(svd(op), 0.0, np.array([2.0, 3.0])), [2.0, 0.0])


def test_fractional_gram_matches_eigendecomposition():
    rng = np.random.default_rng(4)
    op = LinearOperator.dense(rng.standard_normal((4, 4)))
    w, q = np.linalg.eigh(op.matrix.T @ op.matrix)
    p = rng.standard_normal(4)
    expected = q @ (np.maximum(w, 0.0) ** 0.25 * (q.T @ p))
    np.testing.assert_allclose(fractional_gram_apply(svd(op), 0.25, p), expected, atol=1e-10)


def test_fractional_gram_semigroup(random_square):
    f = svd(random_square)
    p = np.random.default_rng(2).standard_normal(8)
    twice = fractional_gram_apply(f, 0.125, fractional_gram_apply(f, 0.125, p))
    np.testing.assert_allclose(twice, fractional_gram_apply(f, 0.25, p), atol=1e-9)


def test_fractional_gram_rejects_nu(diagonal3):
    with pytest.raises(OperatorSpecError):
        fractional_gram_apply(svd(diagonal3), 0.6, np.ones(3))


def test_make_diagonal_operator():
    op = make_test_operator(OperatorSpec(kind="diagonal", size=3, decay=1.0))
    np.testing.assert_allclose(op.data, [1.0, 0.5, 1.0 / 3.0])


def test_diagonal_condition_number():
    op = make_test_operator(OperatorSpec(kind="diagonal", size=100, decay=2.0))
    f = svd(op)
    assert f.singular_values[0] / f.singular_values[-1] == pytest.approx(10_000.0)


def test_zero_width_convolution_is_identity():
    op = make_test_operator(OperatorSpec(kind="convolution", size=5, width=0.0))
    np.testing.assert_array_equal(op.matrix, np.eye(5))
    np.testing.assert_array_equal(gaussian_kernel(0.0), [1.0])


def test_dense_operator_is_seeded():
    a = make_test_operator(OperatorSpec(kind="dense", size=4, cols=6, seed=9))
    b = make_test_operator(OperatorSpec(kind="dense", size=4, cols=6, seed=9))
    assert (a.rows, a.cols) == (4, 6)
    np.testing.assert_array_equal(a.matrix, b.matrix)


@pytest.mark.parametrize(
    "spec",
    [
        OperatorSpec(kind="diagonal", size=0),
        OperatorSpec(kind="diagonal", size=3, decay=-1.0),
        OperatorSpec(kind="wavelet", size=3),
    ],
)
def test_invalid_spec(spec):
    with pytest.raises(OperatorSpecError):
        make_test_operator(spec)


def test_first_difference_is_invertible():
    l_op = first_difference(4)
    np.testing.assert_allclose(l_op.apply(np.array([1.0, 2.0, 4.0, 8.0])), [1.0, 2.0, 4.0, -8.0])
    assert np.linalg.matrix_rank(l_op.gram) == 4


def test_first_difference_step_scales_singular_values():
    n = 50
    s = np.sort(np.linalg.svd(first_difference(n, step=1.0 / n).matrix, compute_uv=False))
    j = np.arange(1, n + 1)
    np.testing.assert_allclose(s, 2.0 * n * np.sin((2 * j - 1) * np.pi / (2 * (2 * n + 1))), rtol=1e-10)
    with pytest.raises(OperatorSpecError):
        first_difference(n, step=0.0)
