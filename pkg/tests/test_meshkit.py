import numpy as np
import pytest

from hzcomplex import meshkit as mk


@pytest.mark.parametrize("name,counts,chi", [
    ("unit_triangle", (3, 3, 1), 1),
    ("crisscross", (5, 8, 4), 1),
    ("square_annulus", (8, 16, 8), 0),
])
def test_builtin_counts(name, counts, chi):
    m = mk.build_mesh(name)
    assert (m.nv, m.ne, m.nt) == counts
    assert m.euler_characteristic() == chi


def test_crisscross_n():
    m = mk.build_mesh("crisscross(3)")
    assert m.nt == 36
    assert sum(m.cell(k).area for k in range(m.nt)) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["unit_triangle", "crisscross", "square_annulus"])
def test_refinement_quarters_cells_and_keeps_area(name):
    m = mk.build_mesh(name)
    r = m.refine_uniform()
    assert r.nt == 4 * m.nt
    assert r.h() == pytest.approx(m.h() / 2)
    assert r.shape_regularity() == pytest.approx(m.shape_regularity())
    assert sum(c.area for c in r.cell_list()) == pytest.approx(sum(c.area for c in m.cell_list()))
    assert r.euler_characteristic() == m.euler_characteristic()


def test_outward_normals_integrate_to_zero(builtin_mesh):
    _, m = builtin_mesh
    tot = np.zeros(2)
    for e in m.boundary_edges:
        L, _, _ = m.edge_frame(e)
        tot += L * m.outward_normal(e)
    np.testing.assert_allclose(tot, 0, atol=1e-13)


def test_outward_normal_points_outside():
    m = mk.unit_triangle()
    for e in m.boundary_edges:
        a, b = m.edges[e]
        mid = 0.5 * (m.vertices[a] + m.vertices[b])
        assert np.linalg.norm(mid + 0.1 * m.outward_normal(e) - [1 / 3, 1 / 3]) > np.linalg.norm(mid - [1 / 3, 1 / 3])


@pytest.mark.parametrize("name,tag,I,I_star", [
    ("unit_triangle", "N", [0], []),
    ("unit_triangle", "D", [], []),
    ("square_annulus", "N", [0, 1], [1]),
    ("square_annulus", "D", [], []),
])
def test_index_sets(name, tag, I, I_star):
    topo = mk.boundary_topology(mk.build_mesh(name, tag=tag))
    assert topo.I == I and topo.I_star == I_star
    assert len(topo.I_star) == max(len(topo.I) - 1, 0)


def test_annulus_components_and_holes():
    topo = mk.boundary_topology(mk.square_annulus())
    assert topo.M == 1
    assert len(topo.components) == 2
    assert sorted(len(c) for c in topo.components) == [4, 4]


def test_mixed_chains(l_shape_mixed, annulus_mixed):
    topo = mk.boundary_topology(l_shape_mixed)
    assert len(topo.gammaD_components) == 1 and len(topo.gammaN_components) == 1
    assert topo.I_star == []
    topo = mk.boundary_topology(annulus_mixed)
    assert topo.I == [0, 1] and len(topo.I_star) == 1
    assert len(topo.gammaN_components) == 2


def test_untagged_edges_are_rejected():
    m = mk.Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    with pytest.raises(mk.TopologyError):
        mk.boundary_topology(m)


def test_clockwise_cell_rejected():
    with pytest.raises(mk.TopologyError):
        mk.Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])


def test_hanging_vertex_rejected():
    verts = [[0, 0], [2, 0], [0, 2], [1, 0], [2, 2]]
    cells = [[0, 3, 2], [3, 1, 2], [1, 4, 2]]
    m_ok = mk.Mesh(verts, cells, default_tag="N")
    assert m_ok.nt == 3
    with pytest.raises(mk.TopologyError):
        mk.Mesh([[0, 0], [2, 0], [0, 2], [1, 1], [2, 2]], [[0, 1, 2], [1, 4, 3], [3, 4, 2]])


def test_file_roundtrip(tmp_path, annulus_mixed):
    path = tmp_path / "m.msh"
    mk.write_mesh(annulus_mixed, path)
    back = mk.read_mesh(path)
    np.testing.assert_array_equal(back.cells, annulus_mixed.cells)
    np.testing.assert_allclose(back.vertices, annulus_mixed.vertices)
    assert list(back.tags) == list(annulus_mixed.tags)


@pytest.mark.parametrize("text,line", [
    ("tri-mesh v2\n", 1),
    ("tri-mesh v1\nv 0 0\nv 1 x\n", 3),
    ("tri-mesh v1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 Q\n", 6),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(mk.MeshParseError, match=f"line {line}"):
        mk.parse_mesh(text)


def test_tag_on_non_edge():
    with pytest.raises(mk.TopologyError):
        mk.parse_mesh("tri-mesh v1\nv 0 0\nv 1 0\nv 0 1\nv 1 1\nt 0 1 2\nt 1 3 2\nb 0 3 D\n")


def test_missing_file_tags_leave_edges_untagged():
    m = mk.parse_mesh("tri-mesh v1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 D\n")
    assert sorted(m.tags[m.boundary_edges]) == ["?", "?", "D"]
