"""Stability constants, cohomology, projections and solvers on the discrete complex.

All matrices work in the broken orthonormal coordinates of :mod:`fespaces`,
so L2 products are Euclidean and only the stress basis (a nodal basis) needs
a genuine Gram matrix.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import fespaces as fs
from . import linalg_core as la
from . import polytri as pt
from .meshkit import boundary_topology
from .polytri import PolyField, apply_diff, nmono


class SurjectivityError(RuntimeError):
    """The discrete divergence is not onto the displacement space."""


class ExactnessError(RuntimeError):
    """A divergence-free field could not be written as harmonic plus Airy part."""


class RangeError(ValueError):
    """Data outside the discrete range of an operator."""


# ---------------------------------------------------------------------------
# saddle system and inf-sup constant
# ---------------------------------------------------------------------------

@dataclass
class SaddleSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    constraint: np.ndarray = None
    dims: dict = field(default_factory=dict)


@dataclass
class InfSupResult:
    beta: float
    nu: float
    dim_sigma: int
    dim_v: int
    residual: float


def _div_on_sigma(S):
    """Broken coordinates (degree p-1) of the divergence of every stress basis column."""
    return fs.div_matrix(S.mesh, S.degree) @ S.basis


def _v_columns(V, p_target):
    """Displacement basis padded to broken degree ``p_target``."""
    E = fs.embed_matrix(2, V.degree, p_target, V.mesh.nt)
    return E @ V.basis


def _to_dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def assemble(S, V):
    """Gram matrix of the stress basis in the graph norm, divergence pairing and mass matrix.

    ``S`` may be a constrained variant (see :func:`arnold_winther_variant`);
    then the parent basis is used and the constraint rows are carried along.
    """
    if S.mesh is not V.mesh:
        raise ValueError("spaces live on different meshes")
    base = S.parent if S.parent is not None else S
    if V.degree > base.degree - 1:
        raise ValueError("displacement degree must not exceed p - 1")
    DS = _div_on_sigma(base)
    Bas = base.basis
    A = _to_dense(Bas.T @ Bas) + _to_dense(DS.T @ DS)
    A = 0.5 * (A + A.T)
    Vc = _v_columns(V, base.degree - 1)
    B = _to_dense(Vc.T @ DS)
    C = _to_dense(V.basis.T @ V.basis)
    C = 0.5 * (C + C.T)
    return SaddleSystem(A, B, C, constraint=S.constraint,
                        dims={"sigma": S.dim, "v": V.dim})


def _constraint_complement(L, Cn, tol=1e-12):
    """Orthonormal basis of ``L^{-1} Cn^T`` (columns to project out)."""
    Y = sla.solve_triangular(L, Cn.T, lower=True, check_finite=False)
    return la.range_basis(Y, tol=tol)


def infsup_beta(sys):
    """``beta = sqrt(nu)`` with ``nu`` the smallest eigenvalue of ``B A^{-1} B^T p = nu C p``."""
    L = la.cholesky(sys.A, "A")
    W = sla.solve_triangular(L, sys.B.T, lower=True, check_finite=False)
    if sys.constraint is not None and sys.constraint.shape[0]:
        Qy = _constraint_complement(L, sys.constraint)
        W = W - Qy @ (Qy.T @ W)
    M = W.T @ W
    M = 0.5 * (M + M.T)
    nu, _, res = la.smallest_gen_eig(M, sys.C)
    if nu < -1e-12:
        raise SurjectivityError(f"negative eigenvalue {nu:.3e}")
    nu = max(nu, 0.0)
    if nu <= 1e-12:
        raise SurjectivityError("divergence is not surjective (nu ~ 0)")
    return InfSupResult(float(np.sqrt(nu)), float(nu), sys.dims.get("sigma"), sys.dims.get("v"),
                        float(res))


# ---------------------------------------------------------------------------
# exactness
# ---------------------------------------------------------------------------

@dataclass
class CohomologyReport:
    dim: int
    dim_ker_div: int
    rank_airy: int
    gap_div: float
    gap_airy: float


def _sigma_basis(S):
    if S.parent is not None and S.basis is None:
        raise ValueError("constrained space without an explicit basis")
    return S.basis


def cohomology_report(S, Q, tol=la.DEFAULT_RANK_TOL):
    """Dimension of ker(div) modulo airy(Q), with the singular-value gaps used."""
    DS = _to_dense(fs.div_matrix(S.mesh, S.degree) @ S.basis)
    r_div, gap_div, _ = la.rank_report(DS, tol)
    H = _to_dense(fs.airy_matrix(S.mesh, Q.degree) @ Q.basis)
    r_airy, gap_airy, _ = la.rank_report(H, tol)
    kdim = S.dim - r_div
    return CohomologyReport(kdim - r_airy, kdim, r_airy, gap_div, gap_airy)


def cohomology_dim(S, Q, tol=la.DEFAULT_RANK_TOL):
    return cohomology_report(S, Q, tol).dim


def divfree_basis(S, tol=la.DEFAULT_RANK_TOL):
    """L2-orthonormal broken coordinates spanning the divergence-free stresses."""
    DS = _to_dense(fs.div_matrix(S.mesh, S.degree) @ S.basis)
    Z = la.null_space(DS, tol)
    return la.range_basis(_to_dense(S.basis @ Z))


@dataclass
class HarmonicBasis:
    broken: np.ndarray
    degree: int
    mesh: object

    @property
    def dim(self):
        return self.broken.shape[1]


def harmonic_basis(S, Q, tol=la.DEFAULT_RANK_TOL):
    """Orthonormal broken coordinates of divergence-free stresses orthogonal to airy(Q)."""
    N = divfree_basis(S, tol)
    H = la.range_basis(_to_dense(fs.airy_matrix(S.mesh, Q.degree) @ Q.basis), tol)
    R = N - H @ (H.T @ N)
    # N has orthonormal columns, so singular values of R lie in [0, 1] and an
    # absolute cut separates harmonic directions from roundoff.
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    h = U[:, s > 1e-6]
    return HarmonicBasis(h, S.degree, S.mesh)


# ---------------------------------------------------------------------------
# boundary moments
# ---------------------------------------------------------------------------

def _rm_values(x):
    """Values of the three rigid motions at points ``x`` -> (n, 3, 2)."""
    n = len(x)
    out = np.zeros((n, 3, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    out[:, 2, 0] = -x[:, 1]
    out[:, 2, 1] = x[:, 0]
    return out


def _boundary_edge_rule(mesh, e, npts):
    """Points, weights, owning cell and outward normal of a boundary edge."""
    x, w, *_ = fs.edge_rule(mesh, e, npts)
    return x, w, mesh.edge_cells[e][0], mesh.outward_normal(e)


def flux_rows(mesh, p, edges):
    """Rows ``<sigma n, r_l>`` summed over ``edges`` acting on broken stress coordinates."""
    N = nmono(p)
    block = 3 * N
    out = np.zeros((3, mesh.nt * block))
    for e in edges:
        x, w, k, n = _boundary_edge_rule(mesh, e, p + 2)
        phi = fs.basis_values(p, mesh.cell(k), x)
        nr = fs.sym_normal_rows(phi, n)  # (n, 2, block)
        r = _rm_values(x)
        out[:, k * block:(k + 1) * block] += np.einsum("q,qlc,qcb->lb", w, r, nr)
    return out


def flux_of_field(mesh, sigma, edges, degree):
    """``<sigma n, r_l>`` over ``edges`` for a global symmetric field."""
    out = np.zeros(3)
    for e in edges:
        x, w, k, n = _boundary_edge_rule(mesh, e, degree + 3)
        val = sigma.evaluate(x) @ n
        out += np.einsum("q,qlc,qc->l", w, _rm_values(x), val)
    return out


def hole_flux_rows(S, components=None):
    """Stacked flux rows for the boundary components in ``I*`` (or ``components``)."""
    topo = boundary_topology(S.mesh, S.tags)
    comps = topo.I_star if components is None else components
    if not comps:
        return np.zeros((0, S.n_broken))
    return np.vstack([flux_rows(S.mesh, S.degree, topo.components[m]) for m in comps])


# ---------------------------------------------------------------------------
# global fields
# ---------------------------------------------------------------------------

def broken_projection(mesh, f, p, shape=None):
    """Broken L2 projection of a global polynomial field onto degree ``p``."""
    shape = shape or f.shape
    deg = f.degree
    return np.concatenate([pt.project_values(f.evaluate, shape, p, K, degree=deg)
                           for K in mesh.cell_list()])


def broken_fields(space, coords, broken=False):
    v = coords if broken else space.basis @ coords
    v = np.asarray(v).ravel()
    b = space.block
    return [pt.field_from_onb(v[k * b:(k + 1) * b], space.shape, space.degree, K)
            for k, K in enumerate(space.mesh.cell_list())]


def hdiv_norm_broken(mesh, p, coords):
    D = fs.div_matrix(mesh, p)
    d = D @ coords
    return float(np.sqrt(coords @ coords + d @ d))


def h2_norm_broken(mesh, P, coords):
    """Full H^2 norm of a broken scalar field (value, gradient and Hessian parts)."""
    tot = coords @ coords
    N = nmono(P)
    for k, K in enumerate(mesh.cell_list()):
        c = coords[k * N:(k + 1) * N]
        Dx, Dy = fs.cell_derivatives(P, K)
        Dx2, Dy2 = fs.cell_derivatives(P - 1, K)
        gx, gy = Dx @ c, Dy @ c
        tot += gx @ gx + gy @ gy
        for h in (Dx2 @ gx, Dy2 @ gx, Dx2 @ gy, Dy2 @ gy):
            tot += h @ h
    return float(np.sqrt(tot))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def _affine_broken(mesh, P):
    cols = []
    for c in ([1, 0, 0], [0, 1, 0], [0, 0, 1]):
        f = PolyField.from_physical("scalar", 1, [c])
        cols.append(broken_projection(mesh, f, P))
    return np.array(cols).T


def project_q(Q, q):
    """Projection onto the potential space matching Airy moments and affine moments."""
    mesh = Q.mesh
    P = Q.degree
    H = _to_dense(fs.airy_matrix(mesh, P) @ Q.basis)
    a = broken_projection(mesh, apply_diff("airy", q), P - 2)
    lhs = H.T @ H
    rhs = H.T @ a
    if fs.p1_gamma_dim(mesh, Q.tags):
        Ab = _affine_broken(mesh, P)
        E = la.range_basis(Q.basis.T @ Ab)
        qb = broken_projection(mesh, q, P)
        Ob = la.range_basis(Ab)
        # moments against an orthonormal affine basis, expressed in Q coordinates
        T = la.solve_least_squares(Q.basis.T @ Ob, E)  # maps affine coords into E frame
        e = T.T @ (Ob.T @ qb)
        lhs = lhs + E @ E.T
        rhs = rhs + E @ e
    return la.solve_least_squares(lhs, rhs)


def project_v(V, v):
    """L2 projection onto the displacement space (coefficients in its basis)."""
    b = broken_projection(V.mesh, v, V.degree)
    return np.asarray(V.basis.T @ b).ravel()


def sigma_projection_system(S, Q, V):
    """Rows of the alternative stress DOFs: airy moments, div moments, hole fluxes."""
    mesh = S.mesh
    H = _to_dense(fs.airy_matrix(mesh, Q.degree) @ Q.basis)
    Bb = _to_dense(S.basis)
    DS = _to_dense(fs.div_matrix(mesh, S.degree) @ S.basis)
    Vc = _to_dense(_v_columns(V, S.degree - 1))
    F = hole_flux_rows(S)
    rows = [H.T @ Bb, Vc.T @ DS, F @ Bb]
    return np.vstack(rows), (H, Vc, F)


def project_sigma(S, Q, V, sigma, tol=1e-8):
    """Stress projection defined by airy moments, div moments and hole fluxes."""
    mesh = S.mesh
    M, (H, Vc, F) = sigma_projection_system(S, Q, V)
    sb = broken_projection(mesh, sigma, S.degree)
    db = broken_projection(mesh, apply_diff("div_tensor", sigma), S.degree - 1)
    topo = boundary_topology(mesh, S.tags)
    fl = [flux_of_field(mesh, sigma, topo.components[m], sigma.degree) for m in topo.I_star]
    rhs = np.concatenate([H.T @ sb, Vc.T @ db] + fl)
    s = la.solve_least_squares(M, rhs)
    res = np.linalg.norm(M @ s - rhs) / max(np.linalg.norm(rhs), 1e-300)
    r, *_ = la.rank_report(M)
    if r < S.dim:
        raise RuntimeError("projection DOFs are not unisolvent")
    if res > tol:
        raise RangeError(f"stress projection system inconsistent (residual {res:.2e})")
    return s


def project_sigma_coords(S, Q, V, s):
    """Same projection applied to a discrete stress given by its coefficients."""
    M, (H, Vc, F) = sigma_projection_system(S, Q, V)
    return la.solve_least_squares(M, M @ s)


# ---------------------------------------------------------------------------
# right inverse of the divergence
# ---------------------------------------------------------------------------

def gamma_n_flux_rows(S):
    topo = boundary_topology(S.mesh, S.tags)
    return [flux_rows(S.mesh, S.degree, chain) for chain in topo.gammaN_components]


def min_norm_div_inverse(S, V, u, omega=None, tol=1e-9):
    """Stress of least graph norm with ``div sigma = u`` and optional Gamma_N fluxes.

    ``u`` holds coefficients in the basis of ``V``.  ``omega[j, l]`` prescribes
    ``<sigma n, r_l>`` over the j-th displacement-boundary component.
    """
    sys = assemble(S, V)
    u = np.asarray(u, dtype=float)
    Bb = _to_dense(S.basis)
    rows = [sys.B]
    rhs = [V.basis.T @ V.basis @ u if sp.issparse(V.basis) else sys.C @ u]
    if omega is not None:
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        Fn = gamma_n_flux_rows(S)
        if omega.shape != (len(Fn), 3):
            raise ValueError(f"omega must have shape ({len(Fn)}, 3)")
        ub = np.asarray(_v_columns(V, V.degree) @ u).ravel()
        mom = _rm_moments_broken(V.mesh, V.degree, ub)
        if np.abs(omega.sum(axis=0) - mom).max() > tol * max(1.0, np.abs(mom).max()):
            raise RangeError("omega violates the compatibility condition sum_j omega_j = int u.r")
        for j, Fj in enumerate(Fn):
            rows.append(Fj @ Bb)
            rhs.append(omega[j])
    E = np.vstack(rows)
    g = np.concatenate(rhs)
    L = la.cholesky(sys.A, "A")
    Y = sla.solve_triangular(L, E.T, lower=True, check_finite=False)
    lam = la.solve_least_squares(Y.T @ Y, g)
    s = sla.solve_triangular(L.T, Y @ lam, lower=False, check_finite=False)
    res = np.linalg.norm(E @ s - g) / max(np.linalg.norm(g), 1e-300)
    if res > tol:
        raise RangeError(f"u is not in the discrete range (residual {res:.2e})")
    return s


def _rm_moments_broken(mesh, p, ub):
    R = fs.rm_broken(mesh, p)
    return R.T @ ub


# ---------------------------------------------------------------------------
# Hodge decomposition
# ---------------------------------------------------------------------------

@dataclass
class HodgeParts:
    phi3: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    norms: dict
    residuals: dict


def hodge_decompose(S, Q, harm3, s, tol=1e-8):
    """Split ``sigma = phi3 + airy q + tau`` with ``phi3`` from the degree-3 harmonic space.

    ``tau`` is the graph-norm orthogonal complement of the divergence-free part;
    ``phi3`` matches the hole fluxes of the divergence-free part; ``q`` is the
    minimum-norm Airy potential of the rest.
    """
    mesh = S.mesh
    p = S.degree
    sb = np.asarray(S.basis @ s).ravel()
    N = divfree_basis(S)
    rho = N @ (N.T @ sb)
    tau_b = sb - rho
    topo = boundary_topology(mesh, S.tags)
    E3 = fs.embed_matrix(3, harm3.degree, p, mesh.nt)
    h3 = _to_dense(E3 @ harm3.broken)
    if topo.I_star:
        F = hole_flux_rows(S)
        Mh = F @ h3
        kappa = F @ rho
        if la.numerical_rank(Mh) < Mh.shape[1]:
            raise ExactnessError("harmonic moment system is singular")
        alpha = np.linalg.solve(Mh, kappa)
    else:
        alpha = np.zeros(h3.shape[1])
    phi_b = h3 @ alpha
    H = _to_dense(fs.airy_matrix(mesh, Q.degree) @ Q.basis)
    target = rho - phi_b
    qc = la.solve_least_squares(H, target)
    res_q = np.linalg.norm(H @ qc - target) / max(np.linalg.norm(sb), 1e-300)
    if res_q > tol:
        raise ExactnessError(f"divergence-free remainder is not an Airy field ({res_q:.2e})")
    tau = la.solve_least_squares(_to_dense(S.basis), tau_b)
    recon = phi_b + H @ qc + tau_b
    D = fs.div_matrix(mesh, p)
    norms = {
        "sigma_div": hdiv_norm_broken(mesh, p, sb),
        "div_sigma": float(np.linalg.norm(D @ sb)),
        "tau_div": hdiv_norm_broken(mesh, p, tau_b),
        "phi3": float(np.linalg.norm(phi_b)),
        "q_h2": h2_norm_broken(mesh, Q.degree, np.asarray(Q.basis @ qc).ravel()),
    }
    residuals = {
        "reconstruction": float(np.linalg.norm(recon - sb) / max(np.linalg.norm(sb), 1e-300)),
        "airy": float(res_q),
        "phi3_div": float(np.linalg.norm(D @ phi_b)),
    }
    return HodgeParts(alpha, qc, tau, norms, residuals)


def hodge_orthogonal(S, Q, s, tol=la.DEFAULT_RANK_TOL):
    """Pairwise orthogonal split using the harmonic space of the same degree.

    Returns broken coordinates ``(phi, airy_part, tau)``.
    """
    sb = np.asarray(S.basis @ s).ravel()
    N = divfree_basis(S, tol)
    rho = N @ (N.T @ sb)
    hb = harmonic_basis(S, Q, tol).broken
    phi = hb @ (hb.T @ rho)
    return phi, rho - phi, sb - rho


# ---------------------------------------------------------------------------
# Hellinger-Reissner
# ---------------------------------------------------------------------------

def compliance_matrix(mesh, p, mu, lam):
    """Broken matrix of ``(A sigma, tau)`` with ``A s = (s - lam/(2 lam + 2 mu) tr(s) I)/(2 mu)``."""
    N = nmono(p)
    c = lam / (2.0 * lam + 2.0 * mu)
    tr = np.array([1.0, 0.0, 1.0])
    blk = (np.eye(3 * N) - c * np.kron(np.outer(tr, tr), np.eye(N))) / (2.0 * mu)
    return sp.block_diag([blk] * mesh.nt, format="csr")


def boundary_load_rows(S, g):
    """Row vector of ``<tau n, g>`` over displacement-side edges, on broken coordinates."""
    mesh = S.mesh
    p = S.degree
    block = 3 * nmono(p)
    out = np.zeros(mesh.nt * block)
    for e in mesh.boundary_edges:
        if S.tags[e] != "N":
            continue
        x, w, k, n = _boundary_edge_rule(mesh, e, p + g.degree + 2)
        nr = fs.sym_normal_rows(fs.basis_values(p, mesh.cell(k), x), n)
        out[k * block:(k + 1) * block] += np.einsum("q,qc,qcb->b", w, g.evaluate(x), nr)
    return out


@dataclass
class HRSolution:
    sigma: np.ndarray
    u: np.ndarray
    residual: float
    info: dict


def solve_hellinger_reissner(S, V, mu, lam, f, g=None):
    """Mixed elasticity with load ``f`` and displacement data ``g`` on the N edges."""
    if mu <= 0 or lam <= 0:
        raise ValueError("Lame parameters must be positive")
    mesh = S.mesh
    p = S.degree
    Bb = _to_dense(S.basis)
    Ac = Bb.T @ (compliance_matrix(mesh, p, mu, lam) @ Bb)
    Ac = 0.5 * (Ac + Ac.T)
    DS = _to_dense(_div_on_sigma(S))
    Vc = _to_dense(_v_columns(V, p - 1))
    B = Vc.T @ DS
    fb = broken_projection(mesh, f, p - 1)
    rf = Vc.T @ fb
    rg = Bb.T @ boundary_load_rows(S, g) if g is not None else np.zeros(S.dim)
    n1, n2 = S.dim, V.dim
    K = np.block([[Ac, B.T], [B, np.zeros((n2, n2))]])
    rhs = np.concatenate([rg, rf])
    try:
        x = sla.solve(K, rhs, assume_a="sym")
    except np.linalg.LinAlgError as exc:
        beta = infsup_beta(assemble(S, V)).beta
        raise RuntimeError(f"singular saddle system (beta = {beta:.3e})") from exc
    res = float(np.linalg.norm(K @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return HRSolution(x[:n1], x[n1:], res, {"cond_estimate": None})


def manufactured_elasticity(u_star, mu, lam):
    """Stress ``2 mu eps(u) + lam div(u) I`` and load ``div sigma`` for a polynomial ``u``."""
    eps = apply_diff("sym", apply_diff("grad", u_star))
    dv = apply_diff("div_vector", u_star).raise_degree(eps.degree).reframe(eps.frame)
    c = 2.0 * mu * eps.coeffs
    c[0] += lam * dv.coeffs[0]
    c[2] += lam * dv.coeffs[0]
    sigma = PolyField("symmatrix2", eps.degree, c, eps.frame)
    return sigma, apply_diff("div_tensor", sigma)


# ---------------------------------------------------------------------------
# Arnold-Winther variant
# ---------------------------------------------------------------------------

def aw_constraint(S):
    """Rows extracting the top-degree part of ``div sigma`` (degree p-1 modes)."""
    p = S.degree
    nt = S.mesh.nt
    Nv = nmono(p - 1)
    lo = nmono(p - 2)
    sel = []
    for k in range(nt):
        for c in range(2):
            sel.append(k * 2 * Nv + c * Nv + np.arange(lo, Nv))
    sel = np.concatenate(sel)
    D = fs.div_matrix(S.mesh, p)[sel]
    return _to_dense(D @ S.basis)


def arnold_winther_variant(S, materialize=None):
    """Stresses whose divergence has degree at most ``p - 2``.

    The constraint rows are kept so solvers can impose them implicitly; an
    explicit basis is formed when ``materialize`` is true (default: small spaces).
    """
    C = aw_constraint(S)
    if materialize is None:
        materialize = S.dim <= 2500
    basis = None
    if materialize:
        Z = la.null_space(C / max(np.abs(C).max(), 1e-300))
        basis = S.basis @ Z
    space = fs.FESpace(S.mesh, "sigma_aw", S.degree, S.bc, "symmatrix2", basis, S.tags,
                       dofs=S.dofs, parent=S, constraint=C)
    if basis is None:
        space.info["dim"] = S.dim - la.numerical_rank(C)
    return space


def aw_dim(space):
    return space.dim
