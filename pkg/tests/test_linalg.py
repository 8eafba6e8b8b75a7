import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from invfree.errors import PowerIterationStall, SingularMatrix
from invfree.linalg import (
    as_matrix,
    as_vector,
    cofactor,
    determinant,
    invert,
    largest_gram_eigenvalue,
    lu_factor,
    lu_solve,
    matrix_norm,
    symmetric_eigenvalues_2x2,
    vector_norm,
)

from .conftest import EXAMPLE_J0

entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(np.float64, (n, n), elements=entries)


def test_invert_example_jacobian_determinant():
    r = invert(EXAMPLE_J0)
    assert r.determinant == pytest.approx(97.95, abs=0.01)
    np.testing.assert_allclose(r.inverse @ EXAMPLE_J0, np.eye(2), atol=1e-14)


def test_invert_identity_and_diagonal():
    r = invert(np.eye(3))
    np.testing.assert_array_equal(r.inverse, np.eye(3))
    assert r.determinant == 1.0
    r = invert([[2.0, 0.0], [0.0, 4.0]])
    np.testing.assert_allclose(r.inverse, [[0.5, 0.0], [0.0, 0.25]])
    assert r.determinant == 8.0


@pytest.mark.parametrize(
    "m",
    [np.zeros((2, 2)), [[1.0, 2.0], [2.0, 4.0]], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]],
)
def test_invert_singular(m):
    with pytest.raises(SingularMatrix):
        invert(m)


def test_singular_threshold_is_relative_to_scale():
    # tiny but well-conditioned: must invert
    r = invert(np.eye(2) * 1e-20)
    assert r.determinant == pytest.approx(1e-40)


def test_inverse_that_overflows_is_singular():
    with pytest.raises(SingularMatrix):
        invert([[2.2e-313]])


def test_power_iteration_at_extreme_scales():
    for scale in (1e-150, 1e150):
        m = np.full((3, 3), scale)
        assert largest_gram_eigenvalue(m) == pytest.approx(9.0 * scale * scale, rel=1e-12)


def test_determinant_sign_follows_pivoting():
    m = [[0.0, 1.0], [1.0, 0.0]]
    assert invert(m).determinant == -1.0
    assert lu_factor(m).sign == -1.0


def test_matrix_must_be_square_and_finite():
    with pytest.raises(ValueError):
        as_matrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_matrix([[math.nan]])
    with pytest.raises(ValueError):
        as_vector([])


def test_values_are_frozen():
    v = as_vector([1.0, 2.0])
    with pytest.raises(ValueError):
        v[0] = 3.0


@given(square(4), arrays(np.float64, 4, elements=entries))
def test_lu_solve_matches_numpy(m, b):
    assume(np.linalg.cond(m) < 1e6)
    x = lu_solve(lu_factor(m), b)
    np.testing.assert_allclose(m @ x, b, atol=1e-8 * (1 + np.max(np.abs(b))))


@given(st.integers(1, 5).flatmap(square))
def test_inverse_times_matrix_is_identity(m):
    assume(np.linalg.cond(m) < 1e6)
    n = m.shape[0]
    with np.errstate(all="ignore"):
        unrepresentable = not np.all(np.isfinite(np.linalg.inv(m)))
    if unrepresentable:
        with pytest.raises(SingularMatrix):
            invert(m)
        return
    inv = invert(m).inverse
    # scale the residual bound by cond, which enters any backward-stable inverse
    tol = 1e-12 * n * max(1.0, np.linalg.cond(m) / 1e3)
    assert np.max(np.abs(inv @ m - np.eye(n))) < tol


def test_cofactor_examples():
    assert cofactor(EXAMPLE_J0, 0, 0) == pytest.approx(9.404)
    assert cofactor(EXAMPLE_J0, 0, 1) == pytest.approx(-4.913)
    assert cofactor(EXAMPLE_J0, 1, 0) == pytest.approx(3.4)
    assert cofactor(np.eye(2), 0, 1) == 0.0
    assert cofactor([[5.0]], 0, 0) == 1.0
    with pytest.raises(IndexError):
        cofactor(np.eye(2), 2, 0)


def test_adjugate_of_random_3x3_matches_lu_inverse():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((3, 3))
    det = invert(m).determinant
    adj_t = np.array([[cofactor(m, i, k) for k in range(3)] for i in range(3)]).T
    np.testing.assert_allclose(adj_t / det, invert(m).inverse, atol=1e-10)


@given(st.integers(2, 3).flatmap(square))
def test_adjugate_identity(m):
    with np.errstate(all="ignore"):
        det = np.linalg.det(m)
    assume(abs(det) > 1e-8 and np.linalg.cond(m) < 1e8)
    ref = np.linalg.inv(m)
    n = m.shape[0]
    for i in range(n):
        for k in range(n):
            got = cofactor(m, k, i) / det
            assert got == pytest.approx(ref[i, k], rel=1e-9, abs=1e-9 * np.max(np.abs(ref)))


@pytest.mark.parametrize("n", [5, 6])
def test_large_cofactor_path_agrees_with_expansion(n):
    rng = np.random.default_rng(n)
    m = rng.standard_normal((n, n))
    i, k = 1, 3
    minor = np.delete(np.delete(m, i, 0), k, 1)
    assert cofactor(m, i, k) == pytest.approx((-1) ** (i + k) * np.linalg.det(minor), rel=1e-9)


def test_determinant_expansion_and_lu_agree():
    rng = np.random.default_rng(3)
    for n in range(1, 7):
        m = rng.standard_normal((n, n))
        assert determinant(m) == pytest.approx(np.linalg.det(m), rel=1e-10)


def test_norms_of_identity():
    for n in (1, 2, 3, 5):
        assert matrix_norm(np.eye(n), "spectral") == pytest.approx(1.0)
        assert matrix_norm(np.eye(n), "frobenius") == pytest.approx(math.sqrt(n))
        assert matrix_norm(np.eye(n), "max_row_sum") == 1.0


def test_spectral_of_diagonal():
    assert matrix_norm([[3.0, 0.0], [0.0, -4.0]], "spectral") == pytest.approx(4.0)


def test_spectral_norm_of_example_inverse():
    u0 = invert(EXAMPLE_J0).inverse
    lam1, lam2 = symmetric_eigenvalues_2x2(u0 @ u0.T)
    assert lam1 == pytest.approx(0.0121, abs=2e-4)
    assert lam2 == pytest.approx(0.0086, abs=2e-4)
    assert matrix_norm(u0, "spectral") == pytest.approx(0.11, abs=1e-3)


@given(st.integers(1, 6).flatmap(square))
def test_spectral_below_frobenius_and_matches_svd(m):
    try:
        s = matrix_norm(m, "spectral")
    except PowerIterationStall:
        # only allowed when the two largest eigenvalues of m m^T nearly tie
        top = np.sort(np.linalg.eigvalsh(m @ m.T))[-2:]
        assert top[0] > 0.999 * top[1]
        return
    assert s <= matrix_norm(m, "frobenius") + 1e-10
    assert s == pytest.approx(np.linalg.norm(m, 2), rel=1e-5, abs=1e-9)


@given(square(2))
def test_closed_form_2x2_matches_power_iteration(m):
    from invfree.linalg import _power_iteration

    g = m @ m.T
    closed = largest_gram_eigenvalue(m)
    small, top = np.linalg.eigvalsh(g)
    assert closed == pytest.approx(top, rel=1e-12, abs=1e-15 * max(1.0, top))
    if top > 0 and small < 0.9 * top:
        # well separated: power iteration from a generic seed must agree
        powered = _power_iteration(g, np.array([0.3, -0.7]))
        if powered is not None and powered > 0.5 * top:
            assert powered == pytest.approx(closed, rel=1e-9)


def test_power_iteration_reseeds_when_ones_seed_is_deficient():
    # ones lies in the null space of m m^T; the true top eigenvalue is 4
    m = [[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
    assert largest_gram_eigenvalue(m) == pytest.approx(4.0)
    # ones is an eigenvector of the smaller eigenvalue only
    q, _ = np.linalg.qr(np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 1.0], [1.0, 0.0, -1.0]]))
    g_sqrt = q @ np.diag([1.0, 3.0, 2.0]) @ q.T
    assert largest_gram_eigenvalue(g_sqrt) == pytest.approx(9.0)
    assert largest_gram_eigenvalue(np.zeros((3, 3))) == 0.0


def test_vector_norms():
    v = [-0.434, 0.1956]
    assert vector_norm(v, "max") == 0.434
    assert vector_norm(v, "euclidean") == pytest.approx(0.476, abs=1e-3)
    assert vector_norm([0.0, 0.0], "max") == 0.0
    assert vector_norm([0.0, 0.0], "euclidean") == 0.0
    with pytest.raises(ValueError):
        vector_norm(v, "l1")
