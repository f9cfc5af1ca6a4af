"""Polynomial fields on a single triangle.

A :class:`PolyField` stores monomial coefficients in the local coordinates
``xi`` of its :class:`Frame`, where physical points are ``x = origin + jac @ xi``.
Cells carry the frame that maps the standard triangle (-1,-1), (1,-1), (-1,1)
onto them, which keeps local coordinates of order one and every cell shares
one orthonormal basis up to a constant factor.

Monomials of total degree ``p`` are ordered by degree and then by the power of
the second coordinate, so ``xi1**i * xi2**j`` sits at ``d(d+1)/2 + j`` with
``d = i + j``.  Bases ordered this way are nested in the degree.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import mpmath
import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi, roots_legendre

SHAPE_COMPONENTS = {"scalar": 1, "vector2": 2, "matrix2": 4, "symmatrix2": 3}

# Weight of each stored component in the Frobenius inner product.
_COMPONENT_WEIGHTS = {
    "scalar": np.array([1.0]),
    "vector2": np.array([1.0, 1.0]),
    "matrix2": np.array([1.0, 1.0, 1.0, 1.0]),
    "symmatrix2": np.array([1.0, 2.0, 1.0]),
}

STANDARD_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
REFERENCE_VERTICES = np.array([[-0.5, 0.0], [0.5, 0.0], [0.0, np.sqrt(3.0) / 2.0]])


class ShapeError(ValueError):
    """Raised when value shapes do not fit an operation."""


# ---------------------------------------------------------------------------
# monomial bookkeeping
# ---------------------------------------------------------------------------

def nmono(p):
    """Number of monomials of total degree at most ``p``."""
    if p < 0:
        return 0
    return (p + 1) * (p + 2) // 2


def mono_index(i, j):
    d = i + j
    return d * (d + 1) // 2 + j


@lru_cache(maxsize=None)
def mono_exponents(p):
    out = [(d - j, j) for d in range(p + 1) for j in range(d + 1)]
    arr = np.array(out, dtype=int).reshape(-1, 2)
    arr.flags.writeable = False
    return arr


def eval_monomials(p, xi):
    """Matrix of all monomials up to degree ``p`` at local points ``xi`` (n, 2)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    e = mono_exponents(p)
    px = xi[:, 0:1] ** np.arange(p + 1)
    py = xi[:, 1:2] ** np.arange(p + 1)
    return px[:, e[:, 0]] * py[:, e[:, 1]]


@lru_cache(maxsize=None)
def diff_matrix(p, axis):
    """Matrix of d/d(xi_axis) from degree-``p`` to degree-``max(p-1, 0)`` coefficients."""
    q = max(p - 1, 0)
    D = np.zeros((nmono(q), nmono(p)))
    for k, (i, j) in enumerate(mono_exponents(p)):
        if axis == 0 and i > 0:
            D[mono_index(i - 1, j), k] = i
        elif axis == 1 and j > 0:
            D[mono_index(i, j - 1), k] = j
    D.flags.writeable = False
    return D


@lru_cache(maxsize=None)
def _product_index(pa, pb):
    ea, eb = mono_exponents(pa), mono_exponents(pb)
    s = ea[:, None, :] + eb[None, :, :]
    d = s[..., 0] + s[..., 1]
    return d * (d + 1) // 2 + s[..., 1]


def mul_coeffs(a, pa, b, pb):
    """Coefficients of the product of two scalar polynomials."""
    out = np.zeros(nmono(pa + pb))
    np.add.at(out, _product_index(pa, pb), np.outer(a, b))
    return out


def pad_coeffs(c, p_from, p_to):
    """Embed coefficients of degree ``p_from`` into degree ``p_to`` (last axis)."""
    c = np.asarray(c, dtype=float)
    n_to = nmono(p_to)
    if p_to >= p_from:
        out = np.zeros(c.shape[:-1] + (n_to,))
        out[..., :c.shape[-1]] = c
        return out
    return c[..., :n_to].copy()


def substitute_affine(c, p, A, b):
    """Coefficients of ``g(eta) = f(A @ eta + b)`` for a scalar ``f`` of degree ``p``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lin = [np.array([b[r], A[r, 0], A[r, 1]]) for r in range(2)]
    powers = []
    for r in range(2):
        pw = [np.array([1.0])]
        for k in range(1, p + 1):
            pw.append(mul_coeffs(pw[-1], k - 1, lin[r], 1))
        powers.append(pw)
    out = np.zeros(nmono(p))
    for k, (i, j) in enumerate(mono_exponents(p)):
        if c[k] == 0.0:
            continue
        term = mul_coeffs(powers[0][i], i, powers[1][j], j)
        out[: term.size] += c[k] * term
    return out


# ---------------------------------------------------------------------------
# frames and cells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """Affine chart ``x = origin + jac @ xi``."""

    origin: tuple
    jac: tuple

    @staticmethod
    def make(origin, jac):
        o = tuple(float(v) for v in np.asarray(origin, dtype=float).ravel())
        J = tuple(tuple(float(v) for v in row) for row in np.asarray(jac, dtype=float))
        return Frame(o, J)

    @staticmethod
    def identity():
        return Frame.make((0.0, 0.0), np.eye(2))

    @staticmethod
    def standard_map(vertices):
        a = np.asarray(vertices, dtype=float)
        origin = 0.5 * (a[1] + a[2])
        jac = np.column_stack([0.5 * (a[1] - a[0]), 0.5 * (a[2] - a[0])])
        return Frame.make(origin, jac)

    @property
    def o(self):
        return np.array(self.origin)

    @property
    def J(self):
        return np.array(self.jac)

    @property
    def Jinv(self):
        return np.linalg.inv(self.J)

    @property
    def detJ(self):
        return float(np.linalg.det(self.J))

    def to_local(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.solve(self.J, (x - self.o).T).T

    def to_physical(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return xi @ self.J.T + self.o

    def close_to(self, other, tol=1e-13):
        scale = 1.0 + np.abs(self.J).max() + np.abs(self.o).max()
        return (np.abs(self.J - other.J).max() <= tol * scale
                and np.abs(self.o - other.o).max() <= tol * scale)


class Cell:
    """Triangle with counterclockwise vertices ``a1, a2, a3``.

    Edge ``i`` (1-based) is opposite vertex ``a_i`` and runs counterclockwise
    from ``a_{i+1}`` to ``a_{i+2}``.
    """

    def __init__(self, vertices):
        a = np.array(vertices, dtype=float).reshape(3, 2)
        e1, e2 = a[1] - a[0], a[2] - a[0]
        signed = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
        if not signed > 0.0:
            raise ValueError("cell vertices must be counterclockwise with positive area")
        self.vertices = a
        self.area = float(signed)
        self.frame = Frame.standard_map(a)
        starts = a[[1, 2, 0]]
        ends = a[[2, 0, 1]]
        vec = ends - starts
        self.edge_lengths = np.linalg.norm(vec, axis=1)
        self.tangents = vec / self.edge_lengths[:, None]
        self.normals = np.column_stack([self.tangents[:, 1], -self.tangents[:, 0]])
        self.edge_starts = starts
        self.edge_ends = ends
        self.diameter = float(self.edge_lengths.max())
        self.inradius = 2.0 * self.area / float(self.edge_lengths.sum())
        self.centroid = a.mean(axis=0)

    @staticmethod
    def reference():
        return Cell(REFERENCE_VERTICES)

    def barycentric(self, i):
        """Barycentric coordinate ``lambda_i`` (1-based) as a degree-1 field."""
        xi = STANDARD_VERTICES
        # lambda is affine in xi and equals 1 at vertex i, 0 at the others
        M = np.column_stack([np.ones(3), xi])
        coef = np.linalg.solve(M, np.eye(3)[:, i - 1])
        return PolyField("scalar", 1, coef[None, :], self.frame)

    def bubble(self):
        b = self.barycentric(1) * self.barycentric(2)
        return b * self.barycentric(3)

    def edge_param(self, edge_index, s):
        """Physical points at arclength ``s`` along edge ``edge_index``."""
        k = edge_index - 1
        s = np.asarray(s, dtype=float)
        return self.edge_starts[k] + s[:, None] * self.tangents[k]

    def __repr__(self):
        return f"Cell({self.vertices.tolist()})"


# ---------------------------------------------------------------------------
# polynomial fields
# ---------------------------------------------------------------------------

class PolyField:
    """Polynomial of one value shape on one triangle.

    ``coeffs`` has shape ``(components, nmono(degree))``.  Symmetric matrices
    store the components 11, 12, 22; general matrices store 11, 12, 21, 22.
    """

    __array_priority__ = 100

    def __init__(self, shape, degree, coeffs, frame=None):
        if shape not in SHAPE_COMPONENTS:
            raise ShapeError(f"unknown shape {shape!r}")
        degree = int(degree)
        if degree < 0:
            raise ValueError("degree must be non-negative")
        c = np.array(coeffs, dtype=float)
        ncomp = SHAPE_COMPONENTS[shape]
        if c.shape != (ncomp, nmono(degree)):
            c = c.reshape(ncomp, nmono(degree))
        self.shape = shape
        self.degree = degree
        self.coeffs = c
        self.frame = frame if frame is not None else Frame.identity()

    # -- constructors ------------------------------------------------------
    @classmethod
    def zeros(cls, shape, degree, frame=None):
        return cls(shape, degree, np.zeros((SHAPE_COMPONENTS[shape], nmono(degree))), frame)

    @classmethod
    def constant(cls, value, frame=None, shape=None):
        v = np.asarray(value, dtype=float)
        if shape is None:
            shape = {0: "scalar", 2: "vector2"}.get(v.size if v.ndim else 0)
            if v.shape == (2, 2):
                shape = "symmatrix2" if np.allclose(v, v.T) else "matrix2"
        comps = _components_from_values(v[None, ...], shape)[0]
        c = np.zeros((SHAPE_COMPONENTS[shape], 1))
        c[:, 0] = comps
        return cls(shape, 0, c, frame)

    @classmethod
    def from_physical(cls, shape, degree, coeffs, frame=None):
        """Field given by monomials in physical ``x, y``, re-expressed in ``frame``."""
        f = cls(shape, degree, coeffs, Frame.identity())
        return f if frame is None else f.reframe(frame)

    @classmethod
    def from_components(cls, shape, parts):
        parts = list(parts)
        deg = max(p.degree for p in parts)
        frame = parts[0].frame
        rows = [p.reframe(frame).raise_degree(deg).coeffs[0] for p in parts]
        return cls(shape, deg, np.array(rows), frame)

    # -- basic algebra ------------------------------------------------------
    @property
    def ncomp(self):
        return SHAPE_COMPONENTS[self.shape]

    def copy(self):
        return PolyField(self.shape, self.degree, self.coeffs.copy(), self.frame)

    def component(self, k):
        return PolyField("scalar", self.degree, self.coeffs[k:k + 1], self.frame)

    def raise_degree(self, p):
        if p == self.degree:
            return self
        return PolyField(self.shape, p, pad_coeffs(self.coeffs, self.degree, p), self.frame)

    def truncate(self, p):
        return PolyField(self.shape, p, pad_coeffs(self.coeffs, self.degree, p), self.frame)

    def reframe(self, frame):
        if self.frame.close_to(frame):
            return PolyField(self.shape, self.degree, self.coeffs, frame)
        Jinv = self.frame.Jinv
        A = Jinv @ frame.J
        b = Jinv @ (frame.o - self.frame.o)
        c = np.array([substitute_affine(row, self.degree, A, b) for row in self.coeffs])
        return PolyField(self.shape, self.degree, c, frame)

    def _aligned(self, other):
        if not isinstance(other, PolyField):
            raise TypeError("expected a PolyField")
        if other.shape != self.shape:
            raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        other = other.reframe(self.frame)
        p = max(self.degree, other.degree)
        return self.raise_degree(p), other.raise_degree(p), p

    def __add__(self, other):
        if np.isscalar(other) and other == 0:
            return self
        a, b, p = self._aligned(other)
        return PolyField(self.shape, p, a.coeffs + b.coeffs, self.frame)

    __radd__ = __add__

    def __sub__(self, other):
        a, b, p = self._aligned(other)
        return PolyField(self.shape, p, a.coeffs - b.coeffs, self.frame)

    def __neg__(self):
        return PolyField(self.shape, self.degree, -self.coeffs, self.frame)

    def __mul__(self, other):
        if isinstance(other, PolyField):
            if other.shape != "scalar" and self.shape != "scalar":
                raise ShapeError("one factor must be scalar")
            if self.shape != "scalar":
                return other * self
            other = other.reframe(self.frame)
            rows = [mul_coeffs(self.coeffs[0], self.degree, r, other.degree) for r in other.coeffs]
            return PolyField(other.shape, self.degree + other.degree, np.array(rows), self.frame)
        return PolyField(self.shape, self.degree, self.coeffs * float(other), self.frame)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, x):
        """Values at physical points ``x`` (n, 2); matrices come back as (n, 2, 2)."""
        xi = self.frame.to_local(x)
        vals = eval_monomials(self.degree, xi) @ self.coeffs.T
        return _values_from_components(vals, self.shape)

    def __call__(self, x):
        return self.evaluate(x)

    def coefficient_norm(self):
        return float(np.linalg.norm(self.coeffs))

    def __repr__(self):
        return f"PolyField({self.shape}, degree={self.degree})"


def _values_from_components(vals, shape):
    if shape == "scalar":
        return vals[:, 0]
    if shape == "vector2":
        return vals
    n = vals.shape[0]
    out = np.empty((n, 2, 2))
    if shape == "matrix2":
        out[:, 0, 0], out[:, 0, 1], out[:, 1, 0], out[:, 1, 1] = vals.T
    else:
        out[:, 0, 0], out[:, 0, 1], out[:, 1, 1] = vals.T
        out[:, 1, 0] = out[:, 0, 1]
    return out


def _components_from_values(vals, shape):
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[0]
    if shape == "scalar":
        return vals.reshape(n, 1)
    if shape == "vector2":
        return vals.reshape(n, 2)
    m = vals.reshape(n, 2, 2)
    if shape == "matrix2":
        return np.column_stack([m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]])
    return np.column_stack([m[:, 0, 0], 0.5 * (m[:, 0, 1] + m[:, 1, 0]), m[:, 1, 1]])


# ---------------------------------------------------------------------------
# differential and algebraic operators
# ---------------------------------------------------------------------------

def partial(f, axis):
    """Physical partial derivative of every component."""
    Jinv = f.frame.Jinv
    p = f.degree
    q = max(p - 1, 0)
    c = (Jinv[0, axis] * (f.coeffs @ diff_matrix(p, 0).T)
         + Jinv[1, axis] * (f.coeffs @ diff_matrix(p, 1).T))
    return PolyField(f.shape, q, c, f.frame)


def _scalar(f, k=0):
    return f.component(k)


def _matrix_rows(f):
    """Return the rows of a (symmetric) matrix field as vector fields."""
    c = f.coeffs
    if f.shape == "matrix2":
        r1, r2 = c[[0, 1]], c[[2, 3]]
    else:
        r1, r2 = c[[0, 1]], c[[1, 2]]
    return (PolyField("vector2", f.degree, r1, f.frame),
            PolyField("vector2", f.degree, r2, f.frame))


DIFF_OPS = ("grad", "curl_scalar", "rot_vector", "div_vector", "div_tensor",
            "airy", "sym", "sskw", "mskw", "perp")


def apply_diff(op, f):
    """Apply one of the operators in :data:`DIFF_OPS` to ``f``.

    Conventions: ``curl_scalar q = (q_y, -q_x)`` (row-wise on vector fields),
    ``perp v = (-v2, v1)``, ``rot_vector v = dv2/dx - dv1/dy``,
    ``airy q = [[q_yy, -q_xy], [-q_xy, q_xx]]`` and matrices are differentiated
    row by row.
    """
    sh = f.shape
    if op == "grad":
        if sh == "scalar":
            return PolyField.from_components("vector2", [partial(f, 0), partial(f, 1)])
        if sh == "vector2":
            g = [partial(f.component(i), a) for i in range(2) for a in range(2)]
            return PolyField.from_components("matrix2", g)
    elif op == "curl_scalar":
        if sh == "scalar":
            return PolyField.from_components("vector2", [partial(f, 1), -partial(f, 0)])
        if sh == "vector2":
            g = []
            for i in range(2):
                fi = f.component(i)
                g += [partial(fi, 1), -partial(fi, 0)]
            return PolyField.from_components("matrix2", g)
    elif op == "rot_vector":
        if sh == "vector2":
            r = partial(f.component(1), 0) - partial(f.component(0), 1)
            return PolyField("scalar", r.degree, r.coeffs, f.frame)
        if sh in ("matrix2", "symmatrix2"):
            rows = _matrix_rows(f)
            return PolyField.from_components("vector2", [apply_diff("rot_vector", r) for r in rows])
    elif op == "div_vector":
        if sh == "vector2":
            return partial(f.component(0), 0) + partial(f.component(1), 1)
    elif op == "div_tensor":
        if sh in ("matrix2", "symmatrix2"):
            rows = _matrix_rows(f)
            return PolyField.from_components("vector2", [apply_diff("div_vector", r) for r in rows])
    elif op == "airy":
        if sh == "scalar":
            fx, fy = partial(f, 0), partial(f, 1)
            return PolyField.from_components(
                "symmatrix2", [partial(fy, 1), -partial(fx, 1), partial(fx, 0)])
    elif op == "sym":
        if sh == "matrix2":
            c = f.coeffs
            return PolyField("symmatrix2", f.degree, [c[0], 0.5 * (c[1] + c[2]), c[3]], f.frame)
        if sh == "symmatrix2":
            return f.copy()
    elif op == "sskw":
        if sh == "matrix2":
            c = f.coeffs
            return PolyField("scalar", f.degree, [0.5 * (c[1] - c[2])], f.frame)
        if sh == "symmatrix2":
            return PolyField.zeros("scalar", f.degree, f.frame)
    elif op == "mskw":
        if sh == "scalar":
            c = f.coeffs[0]
            z = np.zeros_like(c)
            return PolyField("matrix2", f.degree, [z, c, -c, z], f.frame)
    elif op == "perp":
        if sh == "vector2":
            c = f.coeffs
            return PolyField("vector2", f.degree, [-c[1], c[0]], f.frame)
    else:
        raise ValueError(f"unknown operator {op!r}")
    raise ShapeError(f"operator {op!r} does not accept shape {sh!r}")


def to_full_matrix(f):
    """View a symmetric matrix field as a general one."""
    if f.shape == "matrix2":
        return f
    if f.shape != "symmatrix2":
        raise ShapeError("expected a matrix field")
    c = f.coeffs
    return PolyField("matrix2", f.degree, [c[0], c[1], c[1], c[2]], f.frame)


def matvec_const(M, f):
    """Multiply a vector field by a constant 2x2 matrix."""
    M = np.asarray(M, dtype=float)
    return PolyField("vector2", f.degree, M @ f.coeffs, f.frame)


def congruence_const(M, f):
    """``M f M^T`` for a constant matrix ``M`` and a (symmetric) matrix field."""
    full = to_full_matrix(f).coeffs.reshape(2, 2, -1)
    out = np.einsum("ab,bcn,dc->adn", M, full, M)
    if f.shape == "symmatrix2":
        return PolyField("symmatrix2", f.degree, [out[0, 0], out[0, 1], out[1, 1]], f.frame)
    return PolyField("matrix2", f.degree, out.reshape(4, -1), f.frame)


# ---------------------------------------------------------------------------
# exact integration
# ---------------------------------------------------------------------------

def integrate_bary(a, b, c, K):
    """Exact integral of ``lambda1^a lambda2^b lambda3^c`` over ``K``."""
    return 2.0 * K.area * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


def _moment_polys(X, Y, D, one, zero):
    """``h_n`` of ``X_k s + Y_k`` as coefficient lists in ``s``, for n <= D.

    Expanding every monomial in barycentric coordinates gives
    ``int_K xi1^i xi2^j = 2|K| i! j!/(n+2)! [s^i] h_n`` with ``h_n`` the
    complete homogeneous symmetric polynomial of the three vertex forms.
    """
    H = [[one] + [zero] * D] + [[zero] * (D + 1) for _ in range(D)]
    for k in range(3):
        new = [H[0][:]]
        for n in range(1, D + 1):
            prev = new[n - 1]
            row = H[n][:]
            for m in range(n + 1):
                row[m] = row[m] + Y[k] * prev[m] + (X[k] * prev[m - 1] if m > 0 else zero)
            new.append(row)
        H = new
    return H


@lru_cache(maxsize=None)
def _standard_moments_exact(D):
    X = [Fraction(int(v)) for v in STANDARD_VERTICES[:, 0]]
    Y = [Fraction(int(v)) for v in STANDARD_VERTICES[:, 1]]
    H = _moment_polys(X, Y, D, Fraction(1), Fraction(0))
    out = []
    for d in range(D + 1):
        for j in range(d + 1):
            i = d - j
            out.append(Fraction(4 * factorial(i) * factorial(j), factorial(d + 2)) * H[d][i])
    return tuple(out)


def monomial_moments(frame_vertices, area, D):
    """Integrals of all local monomials up to degree ``D`` over a triangle.

    ``frame_vertices`` are the local coordinates of the three vertices.
    """
    X, Y = frame_vertices[:, 0], frame_vertices[:, 1]
    H = _moment_polys(list(X), list(Y), D, 1.0, 0.0)
    out = np.empty(nmono(D))
    k = 0
    for d in range(D + 1):
        for j in range(d + 1):
            i = d - j
            out[k] = 2.0 * area * factorial(i) * factorial(j) / factorial(d + 2) * H[d][i]
            k += 1
    return out


def cell_moments(K, D):
    """Integrals over ``K`` of the monomials of its own frame (degree <= D)."""
    if K.frame.close_to(Frame.standard_map(K.vertices)):
        std = np.array([float(v) for v in _standard_moments_exact(D)])
        return abs(K.frame.detJ) * std
    return monomial_moments(K.frame.to_local(K.vertices), K.area, D)


def integrate(f, K):
    """Integral over ``K`` of every component of ``f`` (returns an array)."""
    f = f.reframe(K.frame)
    if f.frame.close_to(Frame.standard_map(K.vertices)):
        m = cell_moments(K, f.degree)
    else:
        m = monomial_moments(f.frame.to_local(K.vertices), K.area, f.degree)
    return f.coeffs @ m


def l2_inner(f, g, K):
    """Exact L2 inner product on ``K`` (Frobenius product for matrices)."""
    if f.shape != g.shape:
        raise ShapeError(f"shape mismatch: {f.shape} vs {g.shape}")
    f = f.reframe(K.frame)
    g = g.reframe(K.frame)
    w = _COMPONENT_WEIGHTS[f.shape]
    D = f.degree + g.degree
    prod = np.zeros(nmono(D))
    for k in range(f.ncomp):
        prod += w[k] * mul_coeffs(f.coeffs[k], f.degree, g.coeffs[k], g.degree)
    return float(prod @ cell_moments(K, D))


def hdiv_inner(s, t, K):
    if s.shape not in ("symmatrix2", "matrix2") or t.shape != s.shape:
        raise ShapeError("hdiv_inner expects matrix fields of equal shape")
    return l2_inner(s, t, K) + l2_inner(apply_diff("div_tensor", s), apply_diff("div_tensor", t), K)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def standard_quadrature(degree):
    """Collapsed Gauss rule on the standard triangle, exact up to ``degree``."""
    n = max(1, (degree + 2) // 2 + 1)
    a, wa = roots_legendre(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    xi1 = 0.5 * (1.0 + A) * (1.0 - B) - 1.0
    pts = np.column_stack([xi1.ravel(), B.ravel()])
    w = 0.5 * (WA * WB).ravel()
    pts.flags.writeable = False
    w.flags.writeable = False
    return pts, w


def cell_quadrature(K, degree):
    """Physical points and weights on ``K`` exact for polynomials of ``degree``."""
    xi, w = standard_quadrature(degree)
    fr = Frame.standard_map(K.vertices)
    return fr.to_physical(xi), w * abs(fr.detJ)


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


# ---------------------------------------------------------------------------
# orthonormal bases
# ---------------------------------------------------------------------------

_ONB_PREC = 50
_ONB_CACHE = {"degree": -1, "R": None, "Rinv": None}


def _onb_build(D):
    mom = _standard_moments_exact(2 * D)
    N = nmono(D)
    e = mono_exponents(D)
    with mpmath.workdps(_ONB_PREC):
        G = mpmath.matrix(N, N)
        for a in range(N):
            for b in range(a, N):
                i, j = e[a] + e[b]
                v = mom[mono_index(i, j)]
                G[a, b] = G[b, a] = mpmath.mpf(v.numerator) / v.denominator
        L = mpmath.cholesky(G)
        Linv = mpmath.inverse(L)
        R = np.array([[float(Linv[c, r]) for c in range(N)] for r in range(N)])
        Rinv = np.array([[float(L[c, r]) for c in range(N)] for r in range(N)])
    return R, Rinv


def standard_onb(p):
    """Orthonormal basis of P_p on the standard triangle.

    Returns ``(R, Rinv)``: column ``k`` of ``R`` holds the monomial coefficients
    of the k-th basis function; ``Rinv`` converts monomial coefficients to
    orthonormal ones.  Both are upper triangular, so bases are nested.
    """
    if p > _ONB_CACHE["degree"]:
        D = max(p, 12)
        R, Rinv = _onb_build(D)
        _ONB_CACHE.update(degree=D, R=R, Rinv=Rinv)
    N = nmono(p)
    return _ONB_CACHE["R"][:N, :N], _ONB_CACHE["Rinv"][:N, :N]


def _component_scale(shape):
    """Factor mapping orthonormal coordinates to stored components."""
    if shape == "symmatrix2":
        return np.array([1.0, 1.0 / np.sqrt(2.0), 1.0])
    return np.ones(SHAPE_COMPONENTS[shape])


def onb_coords(f, K):
    """Coordinates of ``f`` in the L2-orthonormal basis of ``P_p(K; shape)``.

    Layout is component-major: all scalar coefficients of component 0, then
    component 1, and so on.
    """
    fr = Frame.standard_map(K.vertices)
    f = f.reframe(fr)
    _, Rinv = standard_onb(f.degree)
    s = np.sqrt(abs(fr.detJ))
    c = (f.coeffs @ Rinv.T) * s / _component_scale(f.shape)[:, None]
    return c.ravel()


def field_from_onb(coords, shape, p, K):
    fr = Frame.standard_map(K.vertices)
    R, _ = standard_onb(p)
    c = np.asarray(coords, dtype=float).reshape(SHAPE_COMPONENTS[shape], nmono(p))
    s = np.sqrt(abs(fr.detJ))
    return PolyField(shape, p, (c @ R.T) * _component_scale(shape)[:, None] / s, fr)


def orthonormal_cell_basis(shape, p, K):
    """L2-orthonormal basis of ``P_p(K; shape)`` as a list of fields."""
    n = SHAPE_COMPONENTS[shape] * nmono(p)
    eye = np.eye(n)
    return [field_from_onb(eye[k], shape, p, K) for k in range(n)]


@lru_cache(maxsize=None)
def standard_onb_values(p, pts_key):
    pts = np.array(pts_key).reshape(-1, 2)
    R, _ = standard_onb(p)
    return eval_monomials(p, pts) @ R


def onb_values(p, xi):
    """Values of the standard orthonormal basis at local points ``xi``."""
    R, _ = standard_onb(p)
    return eval_monomials(p, xi) @ R


@lru_cache(maxsize=None)
def standard_onb_derivatives(p):
    """Orthonormal-coordinate matrices of d/dxi1 and d/dxi2 from P_p to P_{p-1}."""
    q = max(p - 1, 0)
    R, _ = standard_onb(p)
    _, Rinv_q = standard_onb(q)
    out = []
    for axis in range(2):
        D = Rinv_q @ diff_matrix(p, axis) @ R
        D.flags.writeable = False
        out.append(D)
    return tuple(out)


def onb_derivatives(p, K):
    """Physical d/dx and d/dy of the orthonormal basis on ``K``."""
    D0, D1 = standard_onb_derivatives(p)
    Jinv = Frame.standard_map(K.vertices).Jinv
    return (Jinv[0, 0] * D0 + Jinv[1, 0] * D1, Jinv[0, 1] * D0 + Jinv[1, 1] * D1)


def project_values(values, shape, p, K, degree=None):
    """L2 projection onto ``P_p(K; shape)`` of a function given as a callable.

    ``values`` maps physical points (n, 2) to values shaped like
    :meth:`PolyField.evaluate`.  The quadrature is exact for data of polynomial
    degree ``degree`` (defaults to ``p``).
    """
    deg = p + (degree if degree is not None else p)
    x, w = cell_quadrature(K, deg)
    fr = Frame.standard_map(K.vertices)
    phi = onb_values(p, fr.to_local(x)) / np.sqrt(abs(fr.detJ))
    comps = _components_from_values(values(x), shape)
    wts = _COMPONENT_WEIGHTS[shape] * _component_scale(shape)
    c = (phi * w[:, None]).T @ comps * wts[None, :]
    return c.T.ravel()


def high_degree_fraction(f, bound, K):
    """Relative L2 weight of ``f`` outside ``P_bound`` (orthonormal coordinates)."""
    c = onb_coords(f, K).reshape(f.ncomp, nmono(f.degree))
    tot = np.linalg.norm(c)
    if tot == 0.0:
        return 0.0
    return float(np.linalg.norm(c[:, nmono(bound):]) / tot)


# ---------------------------------------------------------------------------
# edge traces
# ---------------------------------------------------------------------------

class EdgePoly:
    """Polynomial along one edge in Legendre coefficients of the arclength.

    ``coeffs`` has shape ``(components, degree + 1)`` and refers to Legendre
    polynomials mapped from [-1, 1] onto [0, length].
    """

    def __init__(self, degree, coeffs, length):
        self.degree = int(degree)
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.length = float(length)

    def evaluate(self, s):
        u = 2.0 * np.asarray(s, dtype=float) / self.length - 1.0
        return np.array([npleg.legval(u, c) for c in self.coeffs]).T

    def l2_norm(self):
        m = np.arange(self.degree + 1)
        w = self.length / (2.0 * m + 1.0)
        return float(np.sqrt(np.sum(self.coeffs ** 2 * w)))

    def max_abs_coeff(self):
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0


def edge_trace(f, K, edge_index, mode="full"):
    """Restriction of ``f`` to an edge of ``K``, exactly, as an :class:`EdgePoly`.

    ``mode='normal_component'`` returns ``f . n`` for vectors and ``f n`` for
    matrices, with ``n`` the outward unit normal of the edge.
    """
    if edge_index not in (1, 2, 3):
        raise ValueError("edge_index must be 1, 2 or 3")
    k = edge_index - 1
    L = K.edge_lengths[k]
    n = f.degree + 1
    u, w = gauss_legendre(n)
    s = 0.5 * L * (u + 1.0)
    vals = f.evaluate(K.edge_param(edge_index, s))
    nrm = K.normals[k]
    if mode == "full":
        comps = _components_from_values(vals, f.shape)
    elif mode == "normal_component":
        if f.shape == "vector2":
            comps = (vals @ nrm)[:, None]
        elif f.shape in ("matrix2", "symmatrix2"):
            comps = vals @ nrm
        else:
            raise ShapeError("normal component needs a vector or matrix field")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    P = npleg.legvander(u, f.degree)
    scale = (2.0 * np.arange(f.degree + 1) + 1.0) / 2.0
    coeffs = ((P * w[:, None]).T @ comps) * scale[:, None]
    return EdgePoly(f.degree, coeffs.T, L)
