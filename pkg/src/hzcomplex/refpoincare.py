"""Polynomial-preserving right inverses of ``div`` and ``airy`` on a triangle.

The building blocks are the averaged path-integral operators ``c_curl`` and
``c_div`` on the reference triangle, weighted by the normalised cubic bubble.
They are evaluated in closed form: the substitution
``z = (1 - t) y + t x`` is expanded binomially, the ``t`` integral is a Beta
function, and the ``y`` integral reduces to weighted monomial moments.

From them we build

* ``bgg_ldiv``: a symmetric right inverse of ``div`` that raises the degree by one;
* ``lift_ln``: an Airy potential with prescribed normal trace ``(airy q) n``;
* ``p2`` and ``p1``: right inverses of ``div`` and ``airy`` with vanishing
  normal traces, satisfying ``airy p1 + p2 div = I``;
* ``invert_div_cell``: the same inverse pulled back to an arbitrary triangle.
"""

from functools import lru_cache
from math import comb, factorial

import numpy as np
from numpy.polynomial import Legendre

from . import linalg_core as la
from . import polytri as pt
from .polytri import PolyField, apply_diff, nmono, mono_exponents, mono_index

DEFAULT_PMAX = 12


class DegreeOverflow(ValueError):
    """Input degree exceeds the configured cap."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class LiftInfeasible(RuntimeError):
    """The boundary trace could not be matched at the target degree."""


REF = pt.Cell.reference()


def _beta(m, n):
    return factorial(m) * factorial(n) / factorial(m + n + 1)


def rigid_motions(K):
    """Two translations and the rotation ``(-y, x)`` as fields in ``K``'s frame."""
    fr = K.frame
    e1 = PolyField.from_physical("vector2", 1, [[1, 0, 0], [0, 0, 0]], fr)
    e2 = PolyField.from_physical("vector2", 1, [[0, 0, 0], [1, 0, 0]], fr)
    rot = PolyField.from_physical("vector2", 1, [[0, 0, -1], [0, 1, 0]], fr)
    return [e1, e2, rot]


def rm_moments(u, K):
    return np.array([pt.l2_inner(u, r.raise_degree(max(u.degree, 1)), K)
                     for r in rigid_motions(K)])


def project_off_rm(u, K):
    """Split ``u`` into its RM-orthogonal part and its RM part."""
    rm = rigid_motions(K)
    G = np.array([[pt.l2_inner(a, b, K) for b in rm] for a in rm])
    c = np.linalg.solve(G, rm_moments(u, K))
    removed = rm[0] * c[0] + rm[1] * c[1] + rm[2] * c[2]
    deg = max(u.degree, 1)
    return u.raise_degree(deg) - removed.raise_degree(deg), removed


def _norm(f, K):
    return np.sqrt(max(pt.l2_inner(f, f, K), 0.0))


class PoincareOps:
    """Closed-form Costabel operators on the reference triangle, cached per degree."""

    def __init__(self, p_max=DEFAULT_PMAX, cell=None):
        self.p_max = int(p_max)
        self.cell = cell if cell is not None else REF
        K = self.cell
        self.theta = K.bubble() * (60.0 / K.area)
        self._mu = self._weighted_moments(self.p_max + 3)
        self._cache = {}

    # -- weight and moments ---------------------------------------------------
    def _weighted_moments(self, D):
        m = pt.cell_moments(self.cell, D + 3)
        out = np.zeros(nmono(D))
        th = self.theta.coeffs[0]
        for k, (i, j) in enumerate(mono_exponents(D)):
            for t, (a, b) in enumerate(mono_exponents(3)):
                if th[t] != 0.0:
                    out[k] += th[t] * m[mono_index(i + a, j + b)]
        return out

    def weight_centroid(self):
        """Physical point ``c = int theta(y) y dy``."""
        xi = np.array([self._mu[mono_index(1, 0)], self._mu[mono_index(0, 1)]])
        return self.cell.frame.o + self.cell.frame.J @ xi

    def _check_degree(self, d):
        if d > self.p_max:
            raise DegreeOverflow(f"degree {d} exceeds p_max={self.p_max}")

    def _F(self, d, shift, tpow):
        """Matrix of ``q -> int theta(y) y^shift int t^tpow q((1-t)y + t x) dt dy``."""
        key = ("F", d, shift, tpow)
        if key in self._cache:
            return self._cache[key]
        e = mono_exponents(d)
        M = np.zeros((nmono(d), nmono(d)))
        s1, s2 = shift
        for col, (i, j) in enumerate(e):
            n = i + j
            for a in range(i + 1):
                for b in range(j + 1):
                    w = comb(i, a) * comb(j, b) * _beta(a + b + tpow, n - a - b)
                    M[mono_index(a, b), col] += w * self._mu[mono_index(i - a + s1, j - b + s2)]
        self._cache[key] = M
        return M

    def _times_xi(self, c, d, axis):
        mono = np.zeros(3)
        mono[1 + axis] = 1.0
        return pt.mul_coeffs(c, d, mono, 1)

    def _local(self, f):
        return f.reframe(self.cell.frame)

    # -- Costabel operators ---------------------------------------------------
    def c_div(self, q):
        """Scalar to vector; ``div c_div(q) = q``."""
        if q.shape != "scalar":
            raise pt.ShapeError("c_div expects a scalar field")
        q = self._local(q)
        d = q.degree
        self._check_degree(d)
        c = q.coeffs[0]
        base = self._F(d, (0, 0), 1) @ c
        w = []
        for k in range(2):
            sh = (1, 0) if k == 0 else (0, 1)
            shifted = pt.pad_coeffs(self._F(d, sh, 1) @ c, d, d + 1)
            w.append(self._times_xi(base, d, k) - shifted)
        w = np.array(w)
        return PolyField("vector2", d + 1, self.cell.frame.J @ w, self.cell.frame)

    def c_curl(self, v):
        """Vector to scalar; ``curl c_curl + c_div div = I`` on vector fields."""
        if v.shape != "vector2":
            raise pt.ShapeError("c_curl expects a vector field")
        v = self._local(v)
        d = v.degree
        self._check_degree(d)
        vperp = np.array([-v.coeffs[1], v.coeffs[0]])
        g = self.cell.frame.J.T @ vperp
        out = np.zeros(nmono(d + 1))
        for k in range(2):
            sh = (1, 0) if k == 0 else (0, 1)
            out += self._times_xi(self._F(d, (0, 0), 0) @ g[k], d, k)
            out -= pt.pad_coeffs(self._F(d, sh, 0) @ g[k], d, d + 1)
        return PolyField("scalar", d + 1, out[None, :], self.cell.frame)

    def c_div_rows(self, u):
        """Apply ``c_div`` to each component of ``u``; row ``i`` is ``c_div(u_i)``."""
        rows = [self.c_div(u.component(i)) for i in range(2)]
        c = np.vstack([rows[0].coeffs, rows[1].coeffs])
        return PolyField("matrix2", rows[0].degree, c, self.cell.frame)

    # -- algebraic operators ----------------------------------------------------
    @staticmethod
    def S(i, f):
        """Connecting maps: ``S_0 = I``, ``S_1 = -2 sskw``, ``S_{-1}``/``S_2`` trivial."""
        if i == 0:
            return f.copy()
        if i == 1:
            return apply_diff("sskw", f) * -2.0
        if i in (-1, 2):
            return None
        raise ValueError("index must lie in -1..2")

    @staticmethod
    def T(i, f):
        """Right inverses of the connecting maps: ``T_1 = -mskw / 2``."""
        if i == 0:
            return f.copy()
        if i == 1:
            return apply_diff("mskw", f) * -0.5
        if i in (-1, 2):
            return None
        raise ValueError("index must lie in -1..2")

    # -- compositions ---------------------------------------------------------
    def ldiv(self, u):
        """Symmetric ``sigma`` of degree ``deg(u) + 1`` with ``div sigma = u``.

        ``M = c_div`` row-wise gives ``div M = u``; adding the row-wise curl of
        ``w = -c_div(S_1 M)`` removes the skew part without changing ``div``.
        """
        if u.shape != "vector2":
            raise pt.ShapeError("ldiv expects a vector field")
        M = self.c_div_rows(self._local(u))
        w = self.c_div(self.S(1, M))
        corr = apply_diff("curl_scalar", w)
        X = M - corr.raise_degree(M.degree)
        return apply_diff("sym", X)

    def operator_matrix(self, func, in_shape, degree, out_shape, out_degree):
        """Monomial-coefficient matrix of a linear map on ``P_degree(in_shape)``."""
        ncomp = pt.SHAPE_COMPONENTS[in_shape]
        n_in = ncomp * nmono(degree)
        cols = []
        for k in range(n_in):
            c = np.zeros(n_in)
            c[k] = 1.0
            f = PolyField(in_shape, degree, c.reshape(ncomp, -1), self.cell.frame)
            g = func(f)
            if g.shape != out_shape:
                raise pt.ShapeError("unexpected output shape")
            cols.append(g.raise_degree(out_degree).coeffs.ravel()
                        if g.degree <= out_degree else g.truncate(out_degree).coeffs.ravel())
        return np.array(cols).T


DEFAULT_OPS = None


def default_ops():
    global DEFAULT_OPS
    if DEFAULT_OPS is None:
        DEFAULT_OPS = PoincareOps()
    return DEFAULT_OPS


def c_curl(v):
    return default_ops().c_curl(v)


def c_div(q):
    return default_ops().c_div(q)


def bgg_ldiv(u):
    return default_ops().ldiv(u)


# ---------------------------------------------------------------------------
# boundary lift
# ---------------------------------------------------------------------------

# Counterclockwise traversal from a1: edge 3 (a1->a2), edge 1 (a2->a3), edge 2 (a3->a1).
_CCW_EDGES = (3, 1, 2)


def _onb_trace_rows(P, K, edge, s):
    """Values and outward normal derivatives of the orthonormal basis along an edge."""
    fr = K.frame
    x = K.edge_param(edge, s)
    xi = fr.to_local(x)
    R, _ = pt.standard_onb(P)
    scale = 1.0 / np.sqrt(abs(fr.detJ))
    val = pt.eval_monomials(P, xi) @ R * scale
    q = max(P - 1, 0)
    Vq = pt.eval_monomials(q, xi)
    g0 = Vq @ (pt.diff_matrix(P, 0) @ R) * scale
    g1 = Vq @ (pt.diff_matrix(P, 1) @ R) * scale
    Jinv = fr.Jinv
    n = K.normals[edge - 1]
    dn = (Jinv[0, 0] * n[0] + Jinv[0, 1] * n[1]) * g0 + (Jinv[1, 0] * n[0] + Jinv[1, 1] * n[1]) * g1
    return val, dn


def boundary_potential_traces(tau, K=REF, check_tol=1e-10):
    """Accumulate ``v = int tau n``, ``f = int v.n`` and ``g = -v.t`` counterclockwise.

    Returns one ``(edge, f, g)`` triple per edge, where ``f`` and ``g`` are
    Legendre series in the arclength of that edge, plus the closure defects.
    """
    vs = np.zeros(2)
    fs = 0.0
    pieces = []
    for edge in _CCW_EDGES:
        L = K.edge_lengths[edge - 1]
        tr = pt.edge_trace(tau, K, edge, "normal_component")
        dom = [0.0, L]
        v = [Legendre(tr.coeffs[c], domain=dom).integ(lbnd=0.0) + vs[c] for c in range(2)]
        n = K.normals[edge - 1]
        t = K.tangents[edge - 1]
        vn = v[0] * n[0] + v[1] * n[1]
        f = vn.integ(lbnd=0.0) + fs
        g = -(v[0] * t[0] + v[1] * t[1])
        pieces.append((edge, f, g))
        vs = np.array([v[0](L), v[1](L)])
        fs = float(f(L))
    return pieces, vs, fs


def lift_ln(tau, K=REF, return_residual=False, tol=1e-8):
    """Scalar ``q`` of degree ``deg(tau) + 2`` with ``(airy q) n = tau n`` on the boundary.

    ``div tau`` must be orthogonal to rigid motions, otherwise the boundary
    path integrals do not close.
    """
    if tau.shape not in ("symmatrix2", "matrix2"):
        raise pt.ShapeError("lift_ln expects a matrix field")
    tau = tau.reframe(K.frame)
    d = tau.degree
    P = d + 2
    scale = max(_norm(tau, K), 1e-300)
    if d > 0:
        dv = apply_diff("div_tensor", tau)
        mom = rm_moments(dv, K)
        if np.abs(mom).max() > 1e-10 * max(scale, _norm(dv, K)):
            raise PreconditionError(
                f"div tau is not orthogonal to rigid motions (moments {mom})")
    pieces, v_end, f_end = boundary_potential_traces(tau, K)
    if max(np.abs(v_end).max(), abs(f_end)) > 1e-9 * scale:
        raise PreconditionError("boundary path integrals do not close")
    npts = d + 5
    u, _ = pt.gauss_legendre(npts)
    rows, rhs = [], []
    for edge, f, g in pieces:
        L = K.edge_lengths[edge - 1]
        s = 0.5 * L * (u + 1.0)
        val, dn = _onb_trace_rows(P, K, edge, s)
        rows += [val, dn]
        rhs += [f(s), g(s)]
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    c = la.solve_least_squares(A, b)
    res = float(np.linalg.norm(A @ c - b) / max(np.linalg.norm(b), scale))
    if res > tol:
        raise LiftInfeasible(f"lift infeasible at this degree (residual {res:.3e})")
    q = pt.field_from_onb(c, "scalar", P, K)
    return (q, res) if return_residual else q


# ---------------------------------------------------------------------------
# P2, airy inverse, P1
# ---------------------------------------------------------------------------

def p2(u, K=REF, rm_tol=1e-8, ref_norm=None):
    """Symmetric ``sigma`` with ``div sigma = u`` and zero normal trace.

    ``u`` should be orthogonal to rigid motions; a component of relative size
    below ``rm_tol`` (relative to ``ref_norm``, default the norm of ``u``) is
    projected away, larger ones are rejected.
    """
    if u.shape != "vector2":
        raise pt.ShapeError("p2 expects a vector field")
    u = u.reframe(K.frame)
    un, removed = project_off_rm(u, K)
    nu = _norm(u, K) if ref_norm is None else max(ref_norm, _norm(u, K))
    if _norm(removed, K) > rm_tol * max(nu, 1e-300) and nu > 0:
        raise PreconditionError("input is not orthogonal to rigid motions")
    un = un.truncate(u.degree) if u.degree >= 1 else un
    ops = default_ops() if K is REF else PoincareOps(cell=K)
    s0 = ops.ldiv(un)
    q = lift_ln(s0, K)
    return s0 - apply_diff("airy", q).raise_degree(s0.degree)


@lru_cache(maxsize=None)
def _clamped_airy_matrix(d):
    """Orthonormal coordinates of ``airy(b^2 psi_k)`` for ``psi_k`` spanning P_{d-4}."""
    K = REF
    b2 = K.bubble() * K.bubble()
    cols = []
    for psi in pt.orthonormal_cell_basis("scalar", d - 4, K):
        cols.append(pt.onb_coords(apply_diff("airy", b2 * psi), K))
    return np.array(cols).T


def airy_inverse(sigma, K=REF, tol=1e-8):
    """Clamped ``q`` of degree ``deg(sigma) + 2`` with ``airy q = sigma``.

    The search space is ``b^2 P_{deg - 4}`` with ``b`` the cubic bubble, which is
    exactly the set of polynomials of that degree with vanishing value and
    gradient on the boundary.
    """
    if K is not REF:
        raise NotImplementedError("airy_inverse works on the reference triangle")
    sigma = sigma.reframe(K.frame)
    d = sigma.degree
    scale = _norm(sigma, K)
    if d < 4:
        if scale > tol:
            raise PreconditionError("no nonzero clamped potential exists below degree 4")
        return PolyField.zeros("scalar", d + 2, K.frame)
    A = _clamped_airy_matrix(d)
    b = pt.onb_coords(sigma, K)
    c = la.solve_least_squares(A, b)
    res = np.linalg.norm(A @ c - b)
    if res > tol * max(scale, 1.0 if scale == 0 else scale):
        raise PreconditionError(f"sigma is not the Airy field of a clamped potential (residual {res:.3e})")
    b2 = K.bubble() * K.bubble()
    psi = pt.field_from_onb(c, "scalar", d - 4, K)
    return b2 * psi


def normal_trace_size(sigma, K):
    return max(pt.edge_trace(sigma, K, e, "normal_component").max_abs_coeff() for e in (1, 2, 3))


def p1(sigma, K=REF, tol=1e-9):
    """Clamped Airy potential of ``sigma - p2(div sigma)``."""
    sigma = sigma.reframe(K.frame)
    scale = max(_norm(sigma, K), 1e-300)
    if normal_trace_size(sigma, K) > tol * max(scale, 1.0):
        raise PreconditionError("sigma must have zero normal trace")
    d = sigma.degree
    if d == 0:
        rest = sigma
    else:
        rest = sigma - p2(apply_diff("div_tensor", sigma), K, ref_norm=scale).raise_degree(d)
    return airy_inverse(rest, K)


# ---------------------------------------------------------------------------
# physical cells
# ---------------------------------------------------------------------------

def cell_map(K):
    """Linear part ``B`` of the affine map from the reference triangle onto ``K``."""
    return K.frame.J @ REF.frame.Jinv


def invert_div_cell(u, K, report=False):
    """Zero-normal-trace ``sigma`` on ``K`` with ``div sigma = u``.

    Both cells share the standard-triangle chart, so pulling back is a pure
    change of value coordinates: ``u_hat = B^{-1} u`` and
    ``sigma = B sigma_hat B^T``.
    """
    if u.shape != "vector2":
        raise pt.ShapeError("invert_div_cell expects a vector field")
    u = u.reframe(K.frame)
    un, removed = project_off_rm(u, K)
    nu = _norm(u, K)
    if nu > 0 and _norm(removed, K) > 1e-8 * nu:
        raise PreconditionError("input is not orthogonal to rigid motions on the cell")
    B = cell_map(K)
    uh = PolyField("vector2", un.degree, np.linalg.solve(B, un.coeffs), REF.frame)
    sh = p2(uh, REF, rm_tol=1e-6)
    s = pt.congruence_const(B, sh)
    sigma = PolyField("symmatrix2", s.degree, s.coeffs, K.frame)
    if not report:
        return sigma
    return sigma, inversion_diagnostics(sigma, u, K)


def inversion_diagnostics(sigma, u, K):
    div = apply_diff("div_tensor", sigma)
    err = div - u.raise_degree(div.degree) if div.degree >= u.degree else div.raise_degree(u.degree) - u
    nu = max(_norm(u, K), 1e-300)
    grad_sq = sum(pt.l2_inner(g, g, K) for g in
                  (pt.partial(sigma, 0), pt.partial(sigma, 1)))
    s0 = _norm(sigma, K)
    return {
        "div_residual": _norm(err, K) / nu,
        "trace_residual": normal_trace_size(sigma, K) / max(s0, nu),
        "scaling": (s0 / K.diameter + np.sqrt(grad_sq)) / nu,
    }
