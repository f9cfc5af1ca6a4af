import numpy as np
import pytest

from hzcomplex import polytri as pt
from hzcomplex import refpoincare as rp
from hzcomplex.polytri import Cell, PolyField, apply_diff, nmono
from hzcomplex.suites import random_bubble_stress, random_clamped, random_rm_free

REF = rp.REF
OPS = rp.default_ops()


def norm(f, K=REF):
    return np.sqrt(pt.l2_inner(f, f, K))


def rel(f, g, K=REF):
    d = max(f.degree, g.degree)
    return norm(f.raise_degree(d) - g.raise_degree(d), K) / norm(g, K)


def random_onb(rng, shape, p, K=REF):
    return pt.field_from_onb(rng.standard_normal(pt.SHAPE_COMPONENTS[shape] * nmono(p)), shape, p, K)


def test_weight_has_unit_mass_and_centroid():
    th = OPS.theta
    assert pt.integrate(th, REF)[0] == pytest.approx(1.0, rel=1e-13)
    np.testing.assert_allclose(OPS.weight_centroid(), REF.centroid, atol=1e-13)


@pytest.mark.parametrize("p", [0, 1, 4, 8])
def test_c_div_is_right_inverse(rng, p):
    q = random_onb(rng, "scalar", p)
    v = OPS.c_div(q)
    assert v.degree == p + 1
    assert rel(apply_diff("div_vector", v), q) < 1e-11


@pytest.mark.parametrize("p", [1, 3, 7])
def test_costabel_homotopy_on_vectors(rng, p):
    v = random_onb(rng, "vector2", p)
    rec = apply_diff("curl_scalar", OPS.c_curl(v)).raise_degree(p + 1) + OPS.c_div(apply_diff("div_vector", v))
    assert rel(rec, v) < 1e-11


@pytest.mark.parametrize("p", [1, 4])
def test_connecting_map_commutes_with_curl(rng, p):
    # For vector fields w:  S_1(curl w) = div(S_0 w), with curl acting row-wise.
    w = random_onb(rng, "vector2", p)
    lhs = OPS.S(1, apply_diff("curl_scalar", w))
    rhs = apply_diff("div_vector", OPS.S(0, w))
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)


def test_T1_inverts_S1(rng):
    s = random_onb(rng, "scalar", 3)
    back = OPS.S(1, OPS.T(1, s))
    np.testing.assert_allclose(back.coeffs, s.coeffs, atol=1e-13)


@pytest.mark.parametrize("p", [0, 2, 5])
def test_ldiv(rng, p):
    u = random_onb(rng, "vector2", p)
    s = OPS.ldiv(u)
    assert s.shape == "symmatrix2" and s.degree == p + 1
    assert rel(apply_diff("div_tensor", s), u) < 1e-11


@pytest.mark.parametrize("p", [0, 1, 3, 6])
def test_p2_zero_trace_and_degree(rng, p):
    u = random_rm_free(rng, p)
    s = rp.p2(u)
    assert rel(apply_diff("div_tensor", s), u) < 1e-10
    assert rp.normal_trace_size(s, REF) < 1e-10 * norm(u)
    assert pt.high_degree_fraction(s, u.degree + 1, REF) < 1e-10


def test_p2_rejects_rigid_motion():
    with pytest.raises(rp.PreconditionError):
        rp.p2(rp.rigid_motions(REF)[2])


@pytest.mark.parametrize("p", [0, 2, 4])
def test_p1_inverts_clamped_airy(rng, p):
    q = random_clamped(rng, p)
    assert rel(rp.p1(apply_diff("airy", q)), q) < 1e-9


def test_p1_rejects_nonzero_trace():
    with pytest.raises(rp.PreconditionError):
        rp.p1(PolyField.constant(np.eye(2)))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_homotopy_on_bubble_stresses(rng, p):
    s = random_bubble_stress(rng, p)
    rec = apply_diff("airy", rp.p1(s)).raise_degree(p) + rp.p2(apply_diff("div_tensor", s), ref_norm=norm(s)).raise_degree(p)
    assert rel(rec, s) < 1e-9


def test_lift_ln_reproduces_airy_trace(rng):
    q = random_onb(rng, "scalar", 5)
    tau = apply_diff("airy", q)
    qq = rp.lift_ln(tau)
    diff = apply_diff("airy", qq).raise_degree(5) - tau.raise_degree(5)
    assert rp.normal_trace_size(diff, REF) < 1e-9 * norm(tau)


def test_degree_overflow():
    ops = rp.PoincareOps(p_max=3)
    with pytest.raises(rp.DegreeOverflow):
        ops.c_div(PolyField.zeros("scalar", 5, REF.frame))


@pytest.mark.parametrize("aspect", [1.0, 2.0, 4.0])
def test_invert_div_cell_on_stretched_cells(rng, aspect):
    K = Cell([[0.0, 0.0], [aspect, 0.0], [0.2 * aspect, 1.0]])
    u, _ = rp.project_off_rm(random_onb(rng, "vector2", 3, K), K)
    s, rep = rp.invert_div_cell(u, K, report=True)
    assert rep["div_residual"] < 1e-9
    assert rep["trace_residual"] < 1e-9


def test_invert_div_cell_scaling_is_h_independent(rng):
    base = np.array([[0.0, 0.0], [2.0, 0.0], [0.3, 1.0]])
    uh = random_onb(rng, "vector2", 2, Cell(base))
    consts = []
    for h in (1.0, 0.5, 0.25):
        K = Cell(base * h)
        u = PolyField("vector2", uh.degree, uh.coeffs, K.frame)  # same pulled-back data
        u, _ = rp.project_off_rm(u, K)
        consts.append(rp.invert_div_cell(u, K, report=True)[1]["scaling"])
    assert max(consts) / min(consts) < 2.0
