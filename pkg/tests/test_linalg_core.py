import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from hzcomplex import linalg_core as la


def test_rank_and_gap_of_planted_matrix(rng):
    U, _ = np.linalg.qr(rng.standard_normal((20, 20)))
    W, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    s = np.array([5, 4, 3, 2, 1, 0.5, 1e-14, 1e-15, 0, 0, 0, 0])
    M = U[:, :12] @ np.diag(s) @ W.T
    r, gap, sv = la.rank_report(M, 1e-10)
    assert r == 6
    assert gap > 1e12
    assert la.numerical_rank(M) == 6


def test_null_space_and_range_are_orthonormal_complements(rng):
    M = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 9))
    N = la.null_space(M)
    R = la.range_basis(M.T)
    assert N.shape == (9, 6) and R.shape == (9, 3)
    np.testing.assert_allclose(M @ N, 0, atol=1e-12)
    np.testing.assert_allclose(np.hstack([N, R]).T @ np.hstack([N, R]), np.eye(9), atol=1e-12)


def test_sparse_input_is_accepted(rng):
    M = sp.random(8, 8, density=0.5, random_state=1) + sp.identity(8)
    assert la.numerical_rank(M) == np.linalg.matrix_rank(M.toarray())


def test_least_squares_min_norm():
    M = np.array([[1.0, 1.0]])
    x = la.solve_least_squares(M, np.array([2.0]))
    np.testing.assert_allclose(x, [1.0, 1.0])


def test_cholesky_rejects_indefinite():
    with pytest.raises(la.NotPositiveDefinite):
        la.cholesky(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("n", [1, 4, 30])
def test_smallest_gen_eig_matches_scipy(rng, n):
    A = rng.standard_normal((n, n))
    M = A @ A.T
    B = rng.standard_normal((n, n))
    C = B @ B.T + n * np.eye(n)
    nu, x, res = la.smallest_gen_eig(M, C)
    ref = sla.eigh(M, C, eigvals_only=True)[0]
    assert nu == pytest.approx(ref, rel=1e-10, abs=1e-12)
    assert res < 1e-10
    assert x @ C @ x == pytest.approx(1.0)


def test_nonfinite_input_rejected():
    with pytest.raises(la.LinAlgInputError):
        la.singular_values(np.array([[np.nan]]))
