from math import factorial

import numpy as np
import pytest

from hzcomplex import polytri as pt
from hzcomplex.polytri import Cell, PolyField, apply_diff, nmono

UNIT = Cell([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
SKEW = Cell([[0.3, -0.2], [2.1, 0.4], [0.7, 1.3]])


def random_field(rng, shape, p, cell=UNIT):
    c = rng.standard_normal((pt.SHAPE_COMPONENTS[shape], nmono(p)))
    return PolyField(shape, p, c, cell.frame)


def test_monomial_indexing_roundtrip():
    for p in range(6):
        for k, (i, j) in enumerate(mono_list := pt.mono_exponents(p)):
            assert pt.mono_index(i, j) == k
        assert len(mono_list) == nmono(p)


@pytest.mark.parametrize("i,j", [(0, 0), (1, 0), (2, 3), (5, 1), (0, 7)])
def test_unit_triangle_moments_closed_form(i, j):
    # int_{unit triangle} x^i y^j = i! j! / (i + j + 2)!
    f = PolyField.from_physical("scalar", i + j, [np.eye(nmono(i + j))[pt.mono_index(i, j)]])
    exact = factorial(i) * factorial(j) / factorial(i + j + 2)
    assert pt.integrate(f, UNIT)[0] == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("deg", [0, 3, 8, 13])
def test_quadrature_agrees_with_exact_moments(rng, deg):
    f = random_field(rng, "scalar", deg, SKEW)
    x, w = pt.cell_quadrature(SKEW, deg)
    assert w @ f.evaluate(x) == pytest.approx(pt.integrate(f, SKEW)[0], rel=1e-11)


def test_barycentric_integral():
    assert pt.integrate_bary(1, 1, 1, UNIT) == pytest.approx(0.5 * 2 / 120)


@pytest.mark.parametrize("p", [0, 2, 6, 10])
def test_orthonormal_basis(p):
    basis = pt.orthonormal_cell_basis("scalar", p, SKEW)
    x, w = pt.cell_quadrature(SKEW, 2 * p)
    V = np.array([b.evaluate(x) for b in basis])
    np.testing.assert_allclose((V * w) @ V.T, np.eye(nmono(p)), atol=1e-10)


@pytest.mark.parametrize("shape", ["scalar", "vector2", "symmatrix2"])
def test_onb_coordinates_roundtrip_and_isometry(rng, shape):
    f = random_field(rng, shape, 4, SKEW)
    c = pt.onb_coords(f, SKEW)
    g = pt.field_from_onb(c, shape, 4, SKEW)
    x = pt.cell_quadrature(SKEW, 4)[0]
    np.testing.assert_allclose(g.evaluate(x), f.evaluate(x), atol=1e-11)
    assert c @ c == pytest.approx(pt.l2_inner(f, f, SKEW), rel=1e-11)


def test_reframe_preserves_values(rng):
    f = random_field(rng, "vector2", 5, UNIT)
    g = f.reframe(SKEW.frame)
    x = rng.random((7, 2))
    np.testing.assert_allclose(g.evaluate(x), f.evaluate(x), atol=1e-11)


def test_partial_matches_finite_difference(rng):
    f = random_field(rng, "scalar", 5, SKEW)
    x = np.array([[0.8, 0.3]])
    h = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (f.evaluate(x + e) - f.evaluate(x - e)) / (2 * h)
        assert pt.partial(f, a).evaluate(x)[0] == pytest.approx(fd[0], rel=1e-6)


def test_airy_is_divergence_free(rng):
    q = random_field(rng, "scalar", 6, SKEW)
    d = apply_diff("div_tensor", apply_diff("airy", q))
    assert np.abs(d.coeffs).max() < 1e-11


def test_rot_grad_vanishes(rng):
    q = random_field(rng, "scalar", 5, SKEW)
    assert np.abs(apply_diff("rot_vector", apply_diff("grad", q)).coeffs).max() < 1e-11


def test_product_and_degree_growth(rng):
    a = random_field(rng, "scalar", 2, SKEW)
    b = random_field(rng, "scalar", 3, SKEW)
    x = rng.random((5, 2))
    ab = a * b
    assert ab.degree == 5
    np.testing.assert_allclose(ab.evaluate(x), a.evaluate(x) * b.evaluate(x), rtol=1e-11)


def test_high_degree_fraction(rng):
    f = random_field(rng, "scalar", 3, SKEW).raise_degree(6)
    assert pt.high_degree_fraction(f, 3, SKEW) < 1e-12
    assert pt.high_degree_fraction(random_field(rng, "scalar", 6, SKEW), 3, SKEW) > 1e-3


def test_edge_trace_of_normal_component():
    K = Cell.reference()
    s = PolyField.constant(np.array([[2.0, 1.0], [1.0, 3.0]]))
    for e in (1, 2, 3):
        tr = pt.edge_trace(s, K, e, "normal_component")
        expect = np.array([[2.0, 1.0], [1.0, 3.0]]) @ K.normals[e - 1]
        np.testing.assert_allclose(tr.coeffs[:, 0], expect, atol=1e-13)
        np.testing.assert_allclose(tr.coeffs[:, 1:], 0, atol=1e-13)


def test_reference_cell_geometry():
    K = Cell.reference()
    assert K.area == pytest.approx(np.sqrt(3) / 4)
    for n, t in zip(K.normals, K.tangents):
        assert n @ t == pytest.approx(0.0, abs=1e-15)
        assert t[0] * n[1] - t[1] * n[0] < 0  # outward normal lies to the right of a counterclockwise tangent


def test_shape_mismatch():
    with pytest.raises(pt.ShapeError):
        apply_diff("airy", PolyField.zeros("vector2", 2))
