import numpy as np
import pytest
import scipy.linalg as sla

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk
from hzcomplex.polytri import PolyField, apply_diff, nmono

# Inf-sup constants from an independent computation: stresses spanned by the
# kernel of the conformity constraints (no nodal basis), Schur complement
# B A^{-1} B^T formed explicitly and handed to scipy's generalized eigh.
ORACLE_BETA = {
    ("unit_triangle", "displacement", 3): 0.9860655134584702,
    ("unit_triangle", "displacement", 4): 0.984746347187079,
    ("unit_triangle", "traction", 3): 0.8449273433860718,
    ("unit_triangle", "traction", 4): 0.8537124551179955,
    ("crisscross", "displacement", 3): 0.9672890050809908,
    ("crisscross", "displacement", 4): 0.9671192876857679,
    ("crisscross", "traction", 3): 0.9347273068639641,
    ("crisscross", "traction", 4): 0.9351646451203579,
    ("square_annulus", "displacement", 3): 0.9016046970010637,
    ("square_annulus", "displacement", 4): 0.9087772011720618,
    ("square_annulus", "traction", 3): 0.12734254897827954,
    ("square_annulus", "traction", 4): 0.2696441542750025,
}


def spaces(name, p, bc):
    m = mk.build_mesh(name)
    return m, fs.build_sigma(m, p, bc), fs.build_q(m, p + 2, bc), fs.build_v(m, p - 1, bc)


@pytest.mark.parametrize("key", sorted(ORACLE_BETA))
def test_infsup_against_oracle(key):
    name, bc, p = key
    _, S, _, V = spaces(name, p, bc)
    res = an.infsup_beta(an.assemble(S, V))
    assert res.beta == pytest.approx(ORACLE_BETA[key], abs=1e-10)
    assert res.beta <= 1 + 1e-10
    assert res.residual < 1e-8


def test_oracle_recomputed_here():
    m = mk.crisscross(1)
    p, bc = 3, "traction"
    Z = fs.sigma_constraint_space(m, p, bc)
    D = fs.div_matrix(m, p).toarray() @ Z
    A = np.eye(Z.shape[1]) + D.T @ D
    V = fs.build_v(m, p - 1, bc)
    Vb = V.dense_basis()
    B = Vb.T @ D
    nu = sla.eigh(B @ np.linalg.solve(A, B.T), Vb.T @ Vb, eigvals_only=True)[0]
    assert np.sqrt(nu) == pytest.approx(ORACLE_BETA[("crisscross", "traction", 3)], abs=1e-12)


def test_non_surjective_pair_is_reported():
    m = mk.unit_triangle()
    S = fs.build_sigma(m, 3, "traction")
    V = fs.build_v(m, 2, "none")  # keeps rigid motions, which traction stresses cannot reach
    with pytest.raises(an.SurjectivityError):
        an.infsup_beta(an.assemble(S, V))


@pytest.mark.parametrize("name,bc,expected", [
    ("unit_triangle", "none", 0), ("unit_triangle", "traction", 0),
    ("crisscross", "none", 0), ("crisscross", "traction", 0),
    ("square_annulus", "none", 3), ("square_annulus", "traction", 0),
])
def test_cohomology(name, bc, expected):
    _, S, Q, V = spaces(name, 3, bc)
    rep = an.cohomology_report(S, Q)
    assert rep.dim == expected
    assert an.harmonic_basis(S, Q).dim == expected
    if expected == 0:
        D = fs.div_matrix(S.mesh, 3) @ S.basis
        assert S.dim - rep.dim_ker_div == V.dim  # div is onto
        assert rep.dim_ker_div == rep.rank_airy


def test_harmonic_fields_are_divergence_free_and_airy_orthogonal():
    m, S, Q, _ = spaces("square_annulus", 3, "none")
    h = an.harmonic_basis(S, Q).broken
    assert np.abs(fs.div_matrix(m, 3) @ h).max() < 1e-10
    H = fs.airy_matrix(m, 5) @ Q.basis
    assert np.abs(H.T @ h).max() < 1e-10
    F = an.hole_flux_rows(S)
    assert np.linalg.matrix_rank(F @ h, tol=1e-8) == 3


def test_flux_of_divergence_free_field_cancels_over_boundary():
    m = mk.square_annulus()
    sig = apply_diff("airy", PolyField.from_physical("scalar", 4, np.arange(15.0)[None, :] / 7))
    loops = m.boundary_components()
    total = sum(an.flux_of_field(m, sig, loop, sig.degree) for loop in loops)
    np.testing.assert_allclose(total, 0, atol=1e-11)


def test_rank_identity_on_annulus_needs_the_hole_term():
    _, S, Q, V = spaces("square_annulus", 4, "none")
    rep = an.cohomology_report(S, Q)
    assert rep.dim_ker_div - rep.rank_airy == 3


@pytest.mark.parametrize("name", ["crisscross", "square_annulus"])
def test_projections_commute(name, rng):
    from hzcomplex.suites import projection_residuals
    m, S, Q, V = spaces(name, 3, "none")
    for _ in range(3):
        r_airy, r_div, idem, ray = projection_residuals(S, Q, V, rng)
        assert r_airy < 1e-8 and r_div < 1e-8 and idem < 1e-9 and ray <= 1 + 1e-10


def test_projection_of_discrete_stress_is_identity(rng):
    m, S, Q, V = spaces("crisscross", 3, "none")
    s = rng.standard_normal(S.dim)
    np.testing.assert_allclose(an.project_sigma_coords(S, Q, V, s), s, atol=1e-9)


def test_project_q_reproduces_discrete_potentials(rng):
    m, S, Q, V = spaces("unit_triangle", 3, "none")
    # a global quintic is itself in Q
    q = PolyField.from_physical("scalar", 5, rng.standard_normal((1, nmono(5))))
    c = an.project_q(Q, q)
    qb = an.broken_projection(m, q, 5)
    np.testing.assert_allclose(Q.basis @ c, qb, atol=1e-9)


@pytest.mark.parametrize("name,bc", [("crisscross", "none"), ("square_annulus", "none"),
                                     ("square_annulus", "traction")])
def test_hodge_decomposition(name, bc, rng):
    m, S, Q, V = spaces(name, 4, bc)
    h3 = an.harmonic_basis(fs.build_sigma(m, 3, bc), fs.build_q(m, 5, bc))
    s = rng.standard_normal(S.dim)
    hp = an.hodge_decompose(S, Q, h3, s)
    assert hp.residuals["reconstruction"] < 1e-8
    assert hp.residuals["phi3_div"] < 1e-9
    tau_b = S.basis @ hp.tau
    # tau is (.,.)_div-orthogonal to every divergence-free stress
    N = an.divfree_basis(S)
    assert np.abs(N.T @ tau_b).max() < 1e-9 * np.linalg.norm(tau_b)


def test_orthogonal_hodge_variant(rng):
    m, S, Q, V = spaces("square_annulus", 3, "none")
    s = rng.standard_normal(S.dim)
    phi, a, tau = an.hodge_orthogonal(S, Q, s)
    D = fs.div_matrix(m, 3)

    def ip(x, y):
        return x @ y + (D @ x) @ (D @ y)

    sb = S.basis @ s
    np.testing.assert_allclose(phi + a + tau, sb, atol=1e-10)
    scale = ip(sb, sb)
    for x, y in ((phi, a), (phi, tau), (a, tau)):
        assert abs(ip(x, y)) < 1e-9 * scale


def test_min_norm_div_inverse_with_fluxes(rng):
    m, S, Q, V = spaces("square_annulus", 3, "none")
    u = rng.standard_normal(V.dim)
    ub = an._v_columns(V, 2) @ u
    mom = fs.rm_broken(m, 2).T @ ub
    omega = np.vstack([mom - [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    s = an.min_norm_div_inverse(S, V, u, omega=omega)
    np.testing.assert_allclose(fs.div_matrix(m, 3) @ (S.basis @ s), ub, atol=1e-9)
    topo = mk.boundary_topology(m, S.tags)
    for j, chain in enumerate(topo.gammaN_components):
        np.testing.assert_allclose(an.flux_rows(m, 3, chain) @ (S.basis @ s), omega[j], atol=1e-9)
    with pytest.raises(an.RangeError):
        an.min_norm_div_inverse(S, V, u, omega=omega + 1.0)


@pytest.mark.parametrize("p", [3, 4])
@pytest.mark.parametrize("ratio", [1.0, 1e3, 1e6])
def test_hellinger_reissner_patch(p, ratio, rng):
    from hzcomplex.suites import patch_test
    err, res = patch_test(mk.crisscross(1), p, 1.0, ratio, rng)
    assert err < 1e-8 and res < 1e-9


def test_hellinger_reissner_rejects_bad_parameters():
    m = mk.unit_triangle()
    S, V = fs.build_sigma(m, 3), fs.build_v(m, 2)
    f = PolyField.zeros("vector2", 1)
    with pytest.raises(ValueError):
        an.solve_hellinger_reissner(S, V, -1.0, 1.0, f)


@pytest.mark.parametrize("name,dim", [("unit_triangle", 24), ("crisscross", 59)])
def test_arnold_winther_dimension_and_divergence(name, dim):
    m = mk.build_mesh(name)
    S = fs.build_sigma(m, 3)
    aw = an.arnold_winther_variant(S, materialize=True)
    assert aw.dim == dim
    d = fs.div_matrix(m, 3) @ aw.basis
    top = an.aw_constraint(S)
    assert np.abs(top @ np.linalg.lstsq(S.dense_basis(), aw.basis, rcond=None)[0]).max() < 1e-10
    # the divergence lives in degree p-2
    E = fs.embed_matrix(2, 1, 2, m.nt)
    resid = d - E @ (E.T @ d)
    assert np.abs(resid).max() < 1e-10


def test_arnold_winther_implicit_and_explicit_agree():
    m = mk.crisscross(1)
    S = fs.build_sigma(m, 4, "traction")
    V = fs.build_v(m, 2, "traction")
    b1 = an.infsup_beta(an.assemble(an.arnold_winther_variant(S, materialize=False), V)).beta
    aw = an.arnold_winther_variant(S, materialize=True)
    plain = fs.FESpace(m, "sigma_aw", 4, "traction", "symmatrix2", aw.basis, aw.tags)
    b2 = an.infsup_beta(an.assemble(plain, V)).beta
    assert b1 == pytest.approx(b2, abs=1e-10)
