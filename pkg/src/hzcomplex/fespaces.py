"""Global finite element spaces of the discrete elasticity complex.

Every space is stored as a matrix whose columns are coefficient vectors over
the *broken* basis: on each cell the L2-orthonormal basis of the local
polynomial space, cells stacked one after another and, inside a cell,
components stacked one after another.  L2 inner products of global functions
are then plain dot products of their coefficient vectors.

* ``build_sigma``: the Hu-Zhang stress space, assembled from its nodal basis
  (vertex values, normal edge moments, interior moments).
* ``build_q``: the C^1 potential space of degree ``p + 2`` with C^2 vertices,
  obtained as the kernel of its continuity and boundary constraints.
* ``build_v``: discontinuous displacements, RM-orthogonal under pure traction.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.polynomial import legendre as npleg

from . import linalg_core as la
from . import polytri as pt
from .meshkit import TAGS, boundary_topology
from .polytri import nmono

SQ2 = np.sqrt(2.0)
BC_MODES = ("none", "displacement", "traction", "mixed")


class UnisolvencyError(RuntimeError):
    """A local DOF matrix turned out singular."""


class DimensionMismatch(AssertionError):
    """A dimension identity failed."""


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

def effective_tags(mesh, bc):
    """Per-edge tags for a boundary condition mode.

    ``none`` and ``displacement`` tag every boundary edge ``N``; ``traction``
    tags every boundary edge ``D``; ``mixed`` keeps the mesh's own tags.
    """
    if bc not in BC_MODES:
        raise ValueError(f"unknown boundary condition mode {bc!r}")
    t = mesh.tags.copy()
    if bc in ("none", "displacement"):
        t[mesh.boundary_edges] = "N"
    elif bc == "traction":
        t[mesh.boundary_edges] = "D"
    else:
        for e in mesh.boundary_edges:
            if t[e] not in TAGS:
                raise ValueError("mixed boundary conditions need every boundary edge tagged")
    return t


def full_traction(mesh, tags):
    return all(tags[e] == "D" for e in mesh.boundary_edges)


def p1_gamma_dim(mesh, tags):
    """Dimension of the affine functions surviving the boundary conditions."""
    return 3 if all(tags[e] == "N" for e in mesh.boundary_edges) else 0


# ---------------------------------------------------------------------------
# per-cell helpers in orthonormal coordinates
# ---------------------------------------------------------------------------

def _sqrt_det(K):
    return np.sqrt(abs(K.frame.detJ))


def basis_values(p, K, x):
    """Orthonormal scalar basis of P_p(K) at physical points ``x`` -> (n, N)."""
    return pt.onb_values(p, K.frame.to_local(x)) / _sqrt_det(K)


def basis_gradients(p, K, x):
    """Physical gradients of the orthonormal scalar basis -> (n, N, 2)."""
    xi = K.frame.to_local(x)
    R, _ = pt.standard_onb(p)
    V = pt.eval_monomials(max(p - 1, 0), xi)
    g = np.stack([V @ (pt.diff_matrix(p, a) @ R) for a in range(2)], axis=-1) / _sqrt_det(K)
    return g @ K.frame.Jinv


def basis_hessians(p, K, x):
    """Physical second derivatives ``(xx, xy, yy)`` of the orthonormal basis -> (n, N, 3)."""
    xi = K.frame.to_local(x)
    R, _ = pt.standard_onb(p)
    V = pt.eval_monomials(max(p - 2, 0), xi)
    Jinv = K.frame.Jinv
    H = {}
    for a in range(2):
        for b in range(2):
            H[a, b] = V @ (pt.diff_matrix(max(p - 1, 0), a) @ pt.diff_matrix(p, b) @ R)
    out = []
    for (A, B) in ((0, 0), (0, 1), (1, 1)):
        val = sum(Jinv[k, A] * Jinv[l, B] * H[k, l] for k in range(2) for l in range(2))
        out.append(val)
    return np.stack(out, axis=-1) / _sqrt_det(K)


def sym_value_rows(phi):
    """Rows mapping symmetric-tensor orthonormal coordinates to (s11, s12, s22) values."""
    n, N = phi.shape
    out = np.zeros((n, 3, 3 * N))
    out[:, 0, :N] = phi
    out[:, 1, N:2 * N] = phi / SQ2
    out[:, 2, 2 * N:] = phi
    return out


def sym_normal_rows(phi, nrm):
    """Rows mapping symmetric-tensor coordinates to the two components of ``sigma n``."""
    n, N = phi.shape
    out = np.zeros((n, 2, 3 * N))
    out[:, 0, :N] = phi * nrm[0]
    out[:, 0, N:2 * N] = phi * nrm[1] / SQ2
    out[:, 1, N:2 * N] = phi * nrm[0] / SQ2
    out[:, 1, 2 * N:] = phi * nrm[1]
    return out


def edge_rule(mesh, e, npts):
    """Gauss points on edge ``e`` in its global orientation, with weights and frame."""
    L, t, n = mesh.edge_frame(e)
    u, w = pt.gauss_legendre(npts)
    s = 0.5 * L * (u + 1.0)
    x = mesh.vertices[mesh.edges[e][0]] + s[:, None] * t
    return x, 0.5 * L * w, u, L, t, n


def legendre_orthonormal(u, L, deg):
    """Legendre polynomials orthonormal on an edge of length ``L`` at reference points ``u``."""
    P = npleg.legvander(u, deg)
    return P * np.sqrt((2.0 * np.arange(deg + 1) + 1.0) / L)


@lru_cache(maxsize=None)
def derivative_blocks(p):
    return pt.standard_onb_derivatives(p)


def cell_derivatives(p, K):
    return pt.onb_derivatives(p, K)


def div_block(p, K):
    """Cell matrix of ``div`` from symmetric P_p to vector P_{p-1} coordinates."""
    Dx, Dy = cell_derivatives(p, K)
    Z = np.zeros_like(Dx)
    return np.block([[Dx, Dy / SQ2, Z], [Z, Dx / SQ2, Dy]])


def airy_block(P, K):
    """Cell matrix of ``airy`` from scalar P_P to symmetric P_{P-2} coordinates."""
    Dx, Dy = cell_derivatives(P, K)
    Dx2, Dy2 = cell_derivatives(P - 1, K)
    return np.vstack([Dy2 @ Dy, -SQ2 * (Dx2 @ Dy), Dx2 @ Dx])


def block_diag_sparse(blocks):
    return sp.block_diag(blocks, format="csr")


def div_matrix(mesh, p):
    return block_diag_sparse([div_block(p, K) for K in mesh.cell_list()])


def airy_matrix(mesh, P):
    return block_diag_sparse([airy_block(P, K) for K in mesh.cell_list()])


def embed_matrix(ncomp, p_from, p_to, nt):
    """Sparse zero-padding of broken coordinates from degree ``p_from`` to ``p_to``."""
    a, b = nmono(p_from), nmono(p_to)
    rows, cols = [], []
    for k in range(nt):
        for c in range(ncomp):
            rows.append(k * ncomp * b + c * b + np.arange(a))
            cols.append(k * ncomp * a + c * a + np.arange(a))
    r, c = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.ones(r.size), (r, c)), shape=(nt * ncomp * b, nt * ncomp * a))


def cell_field(coords, shape, p, K):
    return pt.field_from_onb(coords, shape, p, K)


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

@dataclass
class HuZhangDofs:
    p: int
    n_vertex: int
    n_edge: int
    n_interior: int
    local_to_global: np.ndarray
    cond_max: float

    @property
    def total(self):
        return self.n_vertex + self.n_edge + self.n_interior


@dataclass
class FESpace:
    mesh: object
    family: str
    degree: int
    bc: str
    shape: str
    basis: object
    tags: np.ndarray
    dofs: HuZhangDofs = None
    parent: "FESpace" = None
    constraint: np.ndarray = None
    info: dict = field(default_factory=dict)

    @property
    def dim(self):
        if self.basis is None:
            return self.info["dim"]
        return self.basis.shape[1]

    @property
    def block(self):
        return pt.SHAPE_COMPONENTS[self.shape] * nmono(self.degree)

    @property
    def n_broken(self):
        return self.block * self.mesh.nt

    def dense_basis(self):
        b = self.basis
        return b.toarray() if sp.issparse(b) else np.asarray(b)

    def cell_coords(self, coeffs, k):
        """Broken coordinates on cell ``k`` of the function with space coefficients ``coeffs``."""
        v = self.basis @ coeffs
        return np.asarray(v)[k * self.block:(k + 1) * self.block]

    def field_on_cell(self, coeffs, k, broken=False):
        v = coeffs if broken else self.basis @ coeffs
        v = np.asarray(v).ravel()[k * self.block:(k + 1) * self.block]
        return pt.field_from_onb(v, self.shape, self.degree, self.mesh.cell(k))


def _interior_basis(p, K):
    """Orthonormal coordinates of the tensors ``l_{i+1} l_{i+2} P_{p-2} t_i t_i^T``."""
    N = nmono(p)
    scal = _interior_scalars(p)
    cols = []
    for i in range(3):
        t = K.tangents[i]
        w = np.array([t[0] ** 2, SQ2 * t[0] * t[1], t[1] ** 2])
        cols.append(np.kron(w[:, None], scal[i]).reshape(3 * N, -1))
    B = np.hstack(cols)
    Q, _ = np.linalg.qr(B)
    return Q


@lru_cache(maxsize=None)
def _interior_scalars(p):
    """Standard-triangle orthonormal coordinates of ``l_{i+1} l_{i+2} psi``, psi in P_{p-2}."""
    ref = pt.Cell(pt.STANDARD_VERTICES)
    lam = [ref.barycentric(i) for i in (1, 2, 3)]
    psis = pt.orthonormal_cell_basis("scalar", p - 2, ref)
    out = []
    for i in range(3):
        b = lam[(i + 1) % 3] * lam[(i + 2) % 3]
        out.append(np.array([pt.onb_coords(b * psi, ref) for psi in psis]).T)
    return tuple(out)


def interior_space_fields(p, K):
    """Orthonormal basis of the local normally-vanishing tensor space as fields."""
    Q = _interior_basis(p, K)
    return [pt.field_from_onb(Q[:, j], "symmatrix2", p, K) for j in range(Q.shape[1])]


def local_dof_matrix(mesh, k, p):
    """Rows: the Hu-Zhang DOFs of cell ``k`` applied to its orthonormal basis."""
    K = mesh.cell(k)
    N = nmono(p)
    rows = []
    phi_v = basis_values(p, K, K.vertices)
    vr = sym_value_rows(phi_v)
    for i in range(3):
        rows.append(vr[i])
    npts = p + 1
    for i in range(3):
        e = mesh.cell_edges[k][i]
        x, w, u, L, t, nrm = edge_rule(mesh, e, npts)
        phi = basis_values(p, K, x)
        nr = sym_normal_rows(phi, nrm)
        Lm = legendre_orthonormal(u, L, p - 2)
        for c in range(2):
            rows.append((Lm * w[:, None]).T @ nr[:, c, :] / np.sqrt(L))
    Q = _interior_basis(p, K)
    rows.append(Q.T / np.sqrt(K.area))
    A = np.vstack(rows)
    assert A.shape == (3 * N, 3 * N)
    return A


def hu_zhang_numbering(mesh, p):
    nv, ne, nt = mesh.nv, mesh.ne, mesh.nt
    ne_dof = 2 * (p - 1)
    nint = 3 * p * (p - 1) // 2
    offE = 3 * nv
    offT = offE + ne_dof * ne
    l2g = np.zeros((nt, 3 * nmono(p)), dtype=int)
    for k in range(nt):
        idx = []
        for i in range(3):
            v = mesh.cells[k][i]
            idx += [3 * v, 3 * v + 1, 3 * v + 2]
        for i in range(3):
            e = mesh.cell_edges[k][i]
            idx += list(offE + e * ne_dof + np.arange(ne_dof))
        idx += list(offT + k * nint + np.arange(nint))
        l2g[k] = idx
    return l2g, 3 * nv, ne_dof * ne, nint * nt


def _traction_reduction(mesh, p, tags):
    """Sparse map from free DOFs to all DOFs enforcing ``sigma n = 0`` on D edges."""
    l2g, nV, nE, nI = hu_zhang_numbering(mesh, p)
    ntot = nV + nE + nI
    ne_dof = 2 * (p - 1)
    dropped = set()
    vertex_rows = {}
    for e in mesh.boundary_edges:
        if tags[e] != "D":
            continue
        dropped.update(range(nV + e * ne_dof, nV + (e + 1) * ne_dof))
        _, _, n = mesh.edge_frame(e)
        for v in mesh.edges[e]:
            vertex_rows.setdefault(int(v), []).append(
                np.array([[n[0], n[1], 0.0], [0.0, n[0], n[1]]]))
    rows, cols, vals = [], [], []
    col = 0
    for v in range(mesh.nv):
        base = 3 * v
        if v in vertex_rows:
            Z = la.null_space(np.vstack(vertex_rows[v]), tol=1e-10)
            for j in range(Z.shape[1]):
                for a in range(3):
                    if Z[a, j] != 0.0:
                        rows.append(base + a)
                        cols.append(col)
                        vals.append(Z[a, j])
                col += 1
        else:
            for a in range(3):
                rows.append(base + a)
                cols.append(col)
                vals.append(1.0)
                col += 1
    for g in range(nV, ntot):
        if g in dropped:
            continue
        rows.append(g)
        cols.append(col)
        vals.append(1.0)
        col += 1
    return sp.csc_matrix((vals, (rows, cols)), shape=(ntot, col))


def build_sigma(mesh, p, bc="none"):
    """Hu-Zhang space of degree ``p`` assembled from its nodal basis."""
    if p < 3:
        raise ValueError("the stress space needs p >= 3")
    tags = effective_tags(mesh, bc)
    l2g, nV, nE, nI = hu_zhang_numbering(mesh, p)
    nloc = 3 * nmono(p)
    rows, cols, vals = [], [], []
    cond_max = 0.0
    for k in range(mesh.nt):
        A = local_dof_matrix(mesh, k, p)
        s = la.singular_values(A)
        if s[-1] <= 1e-12 * s[0]:
            raise UnisolvencyError(f"local DOF matrix of cell {k} is singular")
        cond_max = max(cond_max, s[0] / s[-1])
        C = np.linalg.inv(A)
        r = np.repeat(k * nloc + np.arange(nloc), nloc)
        c = np.tile(l2g[k], nloc)
        rows.append(r)
        cols.append(c)
        vals.append(C.ravel())
    ntot = nV + nE + nI
    G = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.nt * nloc, ntot))
    G.eliminate_zeros()
    Z = _traction_reduction(mesh, p, tags)
    basis = (G @ Z).tocsc()
    dofs = HuZhangDofs(p, nV, nE, nI, l2g, cond_max)
    return FESpace(mesh, "sigma", p, bc, "symmatrix2", basis, tags, dofs=dofs,
                   info={"unconstrained_dim": ntot, "dof_reduction": Z})


def build_v(mesh, degree, bc="none"):
    """Discontinuous vector fields of the given degree."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    tags = effective_tags(mesh, bc)
    n = mesh.nt * 2 * nmono(degree)
    if full_traction(mesh, tags):
        R = rm_broken(mesh, degree)
        Qf, _ = sla.qr(R, mode="full")
        basis = Qf[:, 3:]
        info = {"rm": Qf[:, :3]}
    else:
        basis = sp.identity(n, format="csc")
        info = {}
    return FESpace(mesh, "v", degree, bc, "vector2", basis, tags, info=info)


def rm_broken(mesh, degree):
    """Broken coordinates of the three rigid motions (translations, rotation)."""
    from .refpoincare import rigid_motions
    d = max(degree, 1)
    cols = []
    for r in range(3):
        parts = []
        for K in mesh.cell_list():
            f = rigid_motions(K)[r]
            c = pt.onb_coords(f.raise_degree(d), K).reshape(2, nmono(d))
            parts.append(c[:, :nmono(degree)].ravel())
        cols.append(np.concatenate(parts))
    return np.array(cols).T


# ---------------------------------------------------------------------------
# potential space
# ---------------------------------------------------------------------------

def _vertex_cells(mesh):
    vc = [[] for _ in range(mesh.nv)]
    for k, c in enumerate(mesh.cells):
        for i in range(3):
            vc[c[i]].append((k, i))
    return vc


def q_constraints(mesh, P, tags):
    """Constraint rows on (broken scalar coordinates, affine auxiliaries).

    Rows: value and normal-derivative jumps across interior edges (Legendre
    moments of full degree), equal Hessians at shared vertices, and on
    traction edges ``q = l_j`` and ``d_n q = d_n l_j``, where ``l_j`` is an
    affine function per traction component; ``l_0 = 0`` for the anchor.
    """
    N = nmono(P)
    nt = mesh.nt
    topo = boundary_topology(mesh, tags)
    comps = topo.gammaD_components
    comp_of = {}
    for j, chain in enumerate(comps):
        for e in chain:
            comp_of[e] = j
    n_aux = 3 * max(len(comps) - 1, 0)
    ncol = nt * N + n_aux
    rows = []
    npts = P + 1
    cells = mesh.cell_list()
    for e in mesh.interior_edges:
        k1, k2 = mesh.edge_cells[e]
        x, w, u, L, t, n = edge_rule(mesh, e, npts)
        Lm = legendre_orthonormal(u, L, P)
        vals = [basis_values(P, cells[k], x) for k in (k1, k2)]
        dns = [basis_gradients(P, cells[k], x) @ n for k in (k1, k2)]
        for data, deg in ((vals, P), (dns, P - 1)):
            W = (Lm[:, :deg + 1] * w[:, None]).T
            R = np.zeros((deg + 1, ncol))
            R[:, k1 * N:(k1 + 1) * N] = W @ data[0]
            R[:, k2 * N:(k2 + 1) * N] = -(W @ data[1])
            rows.append(R)
    for v, inc in enumerate(_vertex_cells(mesh)):
        if len(inc) < 2:
            continue
        x = mesh.vertices[v][None, :]
        H = [basis_hessians(P, cells[k], x)[0].T for k, _ in inc]
        k0 = inc[0][0]
        for (k, _), Hk in zip(inc[1:], H[1:]):
            R = np.zeros((3, ncol))
            R[:, k0 * N:(k0 + 1) * N] = H[0]
            R[:, k * N:(k + 1) * N] = -Hk
            rows.append(R)
    for e in mesh.boundary_edges:
        if tags[e] != "D":
            continue
        j = comp_of[e]
        k = mesh.edge_cells[e][0]
        x, w, u, L, t, n = edge_rule(mesh, e, npts)
        Lm = legendre_orthonormal(u, L, P)
        val = basis_values(P, cells[k], x)
        dn = basis_gradients(P, cells[k], x) @ n
        for data, deg, aff in ((val, P, np.column_stack([np.ones(len(x)), x])),
                               (dn, P - 1, np.tile([0.0, n[0], n[1]], (len(x), 1)))):
            W = (Lm[:, :deg + 1] * w[:, None]).T
            R = np.zeros((deg + 1, ncol))
            R[:, k * N:(k + 1) * N] = W @ data
            if j > 0:
                a0 = nt * N + 3 * (j - 1)
                R[:, a0:a0 + 3] = -(W @ aff)
            rows.append(R)
    A = np.vstack(rows) if rows else np.zeros((0, ncol))
    nrm = np.linalg.norm(A, axis=1)
    A = A[nrm > 0] / nrm[nrm > 0, None]
    return A, n_aux


def build_q(mesh, P, bc="none", tol=la.DEFAULT_RANK_TOL):
    """Potential space of degree ``P = p + 2`` as an orthonormal constraint kernel."""
    if P < 5:
        raise ValueError("the potential space needs degree >= 5")
    tags = effective_tags(mesh, bc)
    A, n_aux = q_constraints(mesh, P, tags)
    nq = mesh.nt * nmono(P)
    if A.shape[0] == 0:
        basis = np.eye(nq + n_aux)[:nq]
        gap = np.inf
    else:
        _, s, vt = sla.svd(A, full_matrices=True, lapack_driver="gesdd")
        r = int(np.sum(s > tol * s[0]))
        gap = s[r - 1] / s[r] if r < len(s) else np.inf
        Nfull = vt[r:].T
        basis = Nfull[:nq]
    basis = la.range_basis(basis, tol=1e-10) if basis.shape[1] else basis
    return FESpace(mesh, "q", P, bc, "scalar", basis, tags,
                   info={"singular_value_gap": gap, "n_aux": n_aux})


def sigma_constraint_space(mesh, p, bc="none", tol=la.DEFAULT_RANK_TOL):
    """The stress space again, as the kernel of its conformity constraints.

    Used as an independent check on the nodal construction.
    """
    tags = effective_tags(mesh, bc)
    N = nmono(p)
    nloc = 3 * N
    ncol = mesh.nt * nloc
    cells = mesh.cell_list()
    rows = []
    for e in range(mesh.ne):
        x, w, u, L, t, n = edge_rule(mesh, e, p + 1)
        Lm = legendre_orthonormal(u, L, p)
        W = (Lm * w[:, None]).T
        ks = mesh.edge_cells[e]
        if len(ks) == 2:
            for c in range(2):
                R = np.zeros((p + 1, ncol))
                for sgn, k in zip((1.0, -1.0), ks):
                    nr = sym_normal_rows(basis_values(p, cells[k], x), n)
                    R[:, k * nloc:(k + 1) * nloc] = sgn * (W @ nr[:, c, :])
                rows.append(R)
        elif tags[e] == "D":
            k = ks[0]
            nr = sym_normal_rows(basis_values(p, cells[k], x), n)
            for c in range(2):
                R = np.zeros((p + 1, ncol))
                R[:, k * nloc:(k + 1) * nloc] = W @ nr[:, c, :]
                rows.append(R)
    for v, inc in enumerate(_vertex_cells(mesh)):
        x = mesh.vertices[v][None, :]
        k0 = inc[0][0]
        V0 = sym_value_rows(basis_values(p, cells[k0], x))[0]
        for k, _ in inc[1:]:
            R = np.zeros((3, ncol))
            R[:, k0 * nloc:(k0 + 1) * nloc] = V0
            R[:, k * nloc:(k + 1) * nloc] = -sym_value_rows(basis_values(p, cells[k], x))[0]
            rows.append(R)
    if not rows:
        return np.eye(ncol)
    A = np.vstack(rows)
    A = A / np.linalg.norm(A, axis=1)[:, None]
    return la.null_space(A, tol=tol)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def dimension_formula(mesh, p):
    return 3 * mesh.nv + 2 * (p - 1) * mesh.ne + 3 * p * (p - 1) // 2 * mesh.nt


@dataclass
class EulerReport:
    dim_sigma: int
    dim_q: int
    dim_v: int
    hole_term: int
    p1_gamma: int

    @property
    def defect(self):
        return self.dim_sigma - (self.dim_q + self.dim_v + self.hole_term - self.p1_gamma)

    @property
    def holds(self):
        return self.defect == 0

    def __str__(self):
        return (f"dim Sigma = {self.dim_sigma}, dim Q = {self.dim_q}, dim V = {self.dim_v}, "
                f"3|I*| = {self.hole_term}, dim P1_Gamma = {self.p1_gamma}")


def euler_dimension_check(mesh, p, bc="none", spaces=None, strict=True):
    """Check ``dim Sigma = dim Q + dim V + 3|I*| - dim P1_Gamma`` with measured dimensions."""
    tags = effective_tags(mesh, bc)
    if spaces is None:
        spaces = (build_sigma(mesh, p, bc), build_q(mesh, p + 2, bc), build_v(mesh, p - 1, bc))
    S, Q, V = spaces
    topo = boundary_topology(mesh, tags)
    rep = EulerReport(S.dim, Q.dim, V.dim, 3 * len(topo.I_star), p1_gamma_dim(mesh, tags))
    if strict and not rep.holds:
        raise DimensionMismatch(f"Euler identity fails: {rep}")
    return rep


def huzhang_combinatorial_check(mesh):
    lhs = 2 * len(mesh.interior_edges) + len(mesh.boundary_edges)
    if lhs != 3 * mesh.nt:
        from .meshkit import TopologyError
        raise TopologyError(f"2|E_I| + |E_B| = {lhs} differs from 3|T| = {3 * mesh.nt}")
    return {"interior_edges": len(mesh.interior_edges),
            "boundary_edges": len(mesh.boundary_edges), "cells": mesh.nt}


def trace_matrices(space, e, npts=None):
    """Maps from broken coordinates to traces on edge ``e`` from each adjacent cell.

    For stresses the trace is ``sigma n_e`` (two components), for scalars the
    value and normal derivative.  Returns a list with one matrix per cell.
    """
    mesh = space.mesh
    p = space.degree
    x, w, u, L, t, n = edge_rule(mesh, e, npts or p + 2)
    out = []
    for k in mesh.edge_cells[e]:
        K = mesh.cell(k)
        phi = basis_values(p, K, x)
        if space.shape == "symmatrix2":
            M = sym_normal_rows(phi, n).transpose(1, 0, 2).reshape(-1, phi.shape[1] * 3)
        elif space.shape == "scalar":
            M = np.vstack([phi, basis_gradients(p, K, x) @ n])
        else:
            raise ValueError("traces are defined for stresses and potentials")
        full = sp.lil_matrix((M.shape[0], space.n_broken))
        full[:, k * space.block:(k + 1) * space.block] = M
        out.append(full.tocsr())
    return out


def conformity_report(space):
    """Largest trace jump across interior edges and vertex jump over all basis columns."""
    mesh = space.mesh
    B = space.basis
    scale = max(np.abs(space.dense_basis()).max(), 1e-300)
    edge_jump = 0.0
    for e in mesh.interior_edges:
        T1, T2 = trace_matrices(space, e)
        edge_jump = max(edge_jump, np.abs((T1 - T2) @ B).max())
    vert_jump = 0.0
    vert_scale = 1e-300
    for v, inc in enumerate(_vertex_cells(mesh)):
        x = mesh.vertices[v][None, :]
        vals = []
        for k, _ in inc:
            K = mesh.cell(k)
            if space.shape == "symmatrix2":
                M = sym_value_rows(basis_values(space.degree, K, x))[0]
            else:
                M = basis_hessians(space.degree, K, x)[0].T
            full = sp.lil_matrix((M.shape[0], space.n_broken))
            full[:, k * space.block:(k + 1) * space.block] = M
            vals.append(np.asarray(full.tocsr() @ B))
        vert_scale = max(vert_scale, max(np.abs(a).max() for a in vals))
        for v2 in vals[1:]:
            vert_jump = max(vert_jump, np.abs(v2 - vals[0]).max())
    bnd = 0.0
    for e in mesh.boundary_edges:
        if space.tags[e] == "D" and space.shape == "symmatrix2":
            (T,) = trace_matrices(space, e)
            bnd = max(bnd, np.abs(T @ B).max())
    if space.shape == "symmatrix2":
        vert_scale = scale
    return {"edge_jump": edge_jump / scale, "vertex_jump": vert_jump / vert_scale,
            "traction_trace": bnd / scale}
