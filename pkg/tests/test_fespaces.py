import numpy as np
import pytest

from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk
from hzcomplex import polytri as pt
from hzcomplex.polytri import Cell, nmono


def argyris_dim(m, P):
    """C1 elements of degree P with C2 vertices.

    Six vertex values per vertex; P-5 value and P-4 normal-derivative moments per
    edge; the remaining (P-5)(P-4)/2 moments inside each cell.
    """
    return 6 * m.nv + (2 * P - 9) * m.ne + (P - 5) * (P - 4) // 2 * m.nt


@pytest.mark.parametrize("name,p,bc,dim", [
    ("unit_triangle", 3, "none", 30),
    ("unit_triangle", 4, "none", 45),
    ("unit_triangle", 3, "traction", 9),
    ("unit_triangle", 4, "traction", 18),
    ("crisscross", 3, "none", 83),
    ("square_annulus", 3, "none", 160),
])
def test_sigma_dimensions(name, p, bc, dim):
    assert fs.build_sigma(mk.build_mesh(name), p, bc).dim == dim


@pytest.mark.parametrize("p", [3, 4, 5, 6])
def test_sigma_dimension_formula(builtin_mesh, p):
    _, m = builtin_mesh
    assert fs.build_sigma(m, p).dim == fs.dimension_formula(m, p)


@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_local_bubble_space(p):
    K = Cell.reference()
    fields = fs.interior_space_fields(p, K)
    assert len(fields) == 3 * p * (p - 1) // 2
    for f in fields:
        for e in (1, 2, 3):
            assert pt.edge_trace(f, K, e, "normal_component").max_abs_coeff() < 1e-12


@pytest.mark.parametrize("bc", ["none", "traction"])
@pytest.mark.parametrize("p", [3, 4])
def test_sigma_matches_constraint_oracle(builtin_mesh, bc, p):
    _, m = builtin_mesh
    S = fs.build_sigma(m, p, bc)
    Z = fs.sigma_constraint_space(m, p, bc)
    assert Z.shape[1] == S.dim
    B = S.dense_basis()
    resid = B - Z @ (Z.T @ B)
    assert np.abs(resid).max() < 1e-9 * np.abs(B).max()


def test_sigma_mixed_fixtures(l_shape_mixed, annulus_mixed):
    for m in (l_shape_mixed, annulus_mixed):
        S = fs.build_sigma(m, 3, "mixed")
        assert S.dim == fs.sigma_constraint_space(m, 3, "mixed").shape[1]
        rep = fs.conformity_report(S)
        assert max(rep.values()) < 1e-10


def test_sigma_conformity(builtin_mesh):
    _, m = builtin_mesh
    rep = fs.conformity_report(fs.build_sigma(m, 4, "traction"))
    assert max(rep.values()) < 1e-10


@pytest.mark.parametrize("P", [5, 6, 7, 8])
def test_q_dimension_matches_argyris_count(builtin_mesh, P):
    _, m = builtin_mesh
    assert fs.build_q(m, P).dim == argyris_dim(m, P)


def test_q_is_c1(builtin_mesh):
    _, m = builtin_mesh
    Q = fs.build_q(m, 6)
    for e in m.interior_edges:
        T = fs.trace_matrices(Q, e)
        jump = (T[0] - T[1]) @ Q.basis
        assert np.abs(jump).max() < 1e-9


@pytest.mark.parametrize("bc", ["none", "traction"])
def test_airy_of_q_lies_in_sigma(builtin_mesh, bc):
    _, m = builtin_mesh
    p = 3
    S, Q = fs.build_sigma(m, p, bc), fs.build_q(m, p + 2, bc)
    H = fs.airy_matrix(m, p + 2) @ Q.basis
    if H.shape[1] == 0:
        return
    B = S.dense_basis()
    c = np.linalg.lstsq(B, H, rcond=None)[0]
    assert np.abs(B @ c - H).max() < 1e-9 * max(np.abs(H).max(), 1.0)


def test_traction_displacements_orthogonal_to_rigid_motions():
    m = mk.square_annulus()
    V = fs.build_v(m, 2, "traction")
    R = fs.rm_broken(m, 2)
    assert V.dim == 2 * nmono(2) * m.nt - 3
    assert np.abs(R.T @ V.basis).max() < 1e-12


@pytest.mark.parametrize("bc", ["none", "traction"])
@pytest.mark.parametrize("p", [3, 4, 5, 6])
def test_euler_identity(builtin_mesh, bc, p):
    _, m = builtin_mesh
    assert fs.euler_dimension_check(m, p, bc).holds


@pytest.mark.parametrize("p", [3, 4])
def test_euler_identity_mixed(l_shape_mixed, annulus_mixed, p):
    for m in (l_shape_mixed, annulus_mixed):
        assert fs.euler_dimension_check(m, p, "mixed").holds


def test_hu_zhang_local_dofs_are_unisolvent():
    m = mk.crisscross(1)
    for p in (3, 5):
        S = fs.build_sigma(m, p)
        assert S.dofs.total == S.info["unconstrained_dim"]
        assert S.dofs.cond_max < 1e3


def test_errors():
    m = mk.unit_triangle()
    with pytest.raises(ValueError):
        fs.build_q(m, 4)
    with pytest.raises(ValueError):
        fs.build_sigma(m, 3, "clamped")
    with pytest.raises(ValueError):
        fs.effective_tags(mk.Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]]), "mixed")
