"""Dense linear algebra used throughout the package.

Everything here is a thin, validated layer over LAPACK (through numpy and
scipy).  The callers only rely on three things: orthonormal null spaces with
a relative singular-value cut, minimum-norm least squares, and the smallest
eigenpair of a symmetric-definite pencil.
"""

import numpy as np
import scipy.linalg as sla

DEFAULT_RANK_TOL = 1e-10


class LinAlgInputError(ValueError):
    """Raised for malformed matrices (non-finite, wrong shape, asymmetric)."""


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization fails."""


def as_dense(M, name="matrix"):
    """Return ``M`` as a finite 2D float array, converting sparse input."""
    if hasattr(M, "toarray"):
        M = M.toarray()
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2:
        raise LinAlgInputError(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise LinAlgInputError(f"{name} has non-finite entries")
    return M


def singular_values(M):
    M = as_dense(M)
    if min(M.shape) == 0:
        return np.zeros(0)
    return sla.svdvals(M)


def rank_report(M, tol=DEFAULT_RANK_TOL):
    """Numerical rank of ``M`` plus the singular-value gap at the cut.

    The gap is ``s[r-1] / s[r]`` (infinite when nothing is cut off or nothing
    is kept), which callers use to decide whether a rank is trustworthy.
    """
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0, np.inf, s
    r = int(np.sum(s > tol * s[0]))
    if r == 0 or r == s.size:
        gap = np.inf
    else:
        gap = s[r - 1] / max(s[r], np.finfo(float).tiny)
    return r, gap, s


def numerical_rank(M, tol=DEFAULT_RANK_TOL):
    return rank_report(M, tol)[0]


def null_space(M, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical kernel of ``M``.

    Singular values below ``tol * s_max`` count as zero.  A matrix with no
    rows has the whole space as its kernel.
    """
    if not 0.0 < tol < 1.0:
        raise LinAlgInputError("tol must lie in (0, 1)")
    M = as_dense(M)
    m, n = M.shape
    if m == 0 or not np.any(M):
        return np.eye(n)
    _, s, vt = sla.svd(M, full_matrices=True, lapack_driver="gesdd")
    r = int(np.sum(s > tol * s[0]))
    return vt[r:].T.copy()


def range_basis(M, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the column space of ``M``."""
    M = as_dense(M)
    if M.shape[1] == 0 or not np.any(M):
        return np.zeros((M.shape[0], 0))
    u, s, _ = sla.svd(M, full_matrices=False, lapack_driver="gesdd")
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r].copy()


def solve_least_squares(M, b, rcond=None):
    """Minimum-norm least-squares solution of ``M x = b``.

    ``b`` may be a vector or a matrix of right-hand sides.  Uses the SVD
    based driver, so rank-deficient systems return the minimum-norm minimiser.
    """
    M = as_dense(M)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != M.shape[0]:
        raise LinAlgInputError(
            f"dimension mismatch: matrix has {M.shape[0]} rows, right-hand side {b.shape[0]}")
    if M.shape[1] == 0:
        return np.zeros((0,) + b.shape[1:])
    if rcond is None:
        rcond = DEFAULT_RANK_TOL
    x, *_ = sla.lstsq(M, b, cond=rcond, lapack_driver="gelsd")
    return x


def cholesky(C, name="C"):
    """Lower Cholesky factor, raising :class:`NotPositiveDefinite` on failure."""
    try:
        return sla.cholesky(C, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} not positive definite") from exc


def _check_symmetric(M, name, rtol=1e-12):
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > rtol * scale:
        raise LinAlgInputError(f"{name} is not symmetric")


def smallest_gen_eig(M, C):
    """Smallest eigenpair of ``M x = nu C x``.

    ``C = L L^T`` is factored and the standard problem for ``L^{-1} M L^{-T}``
    is solved for its lowest eigenvalue only.  Returns ``(nu, x, residual)``
    with ``residual = ||M x - nu C x|| / ||x||``.
    """
    M = as_dense(M, "M")
    C = as_dense(C, "C")
    if M.shape != C.shape or M.shape[0] != M.shape[1]:
        raise LinAlgInputError("M and C must be square with matching shapes")
    _check_symmetric(M, "M")
    _check_symmetric(C, "C")
    n = M.shape[0]
    if n == 0:
        raise LinAlgInputError("empty pencil")
    L = cholesky(C)
    X = sla.solve_triangular(L, M, lower=True, check_finite=False)
    K = sla.solve_triangular(L, X.T, lower=True, check_finite=False)
    K = 0.5 * (K + K.T)
    w, v = sla.eigh(K, subset_by_index=[0, 0], driver="evr", check_finite=False)
    nu = float(w[0])
    x = sla.solve_triangular(L.T, v[:, 0], lower=False, check_finite=False)
    residual = float(np.linalg.norm(M @ x - nu * (C @ x)) / np.linalg.norm(x))
    return nu, x, residual
