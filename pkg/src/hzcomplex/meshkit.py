"""Triangulations with tagged boundaries.

Boundary edges carry one of two tags: ``D`` marks the traction side, where the
normal component of the stress vanishes, and ``N`` marks the displacement
side.  Edges are stored with the lower vertex index first; that orientation
also fixes the global edge tangent ``t = (x_hi - x_lo)/|e|`` and normal
``n = (t_y, -t_x)`` used by the finite element spaces.
"""

from dataclasses import dataclass, field
import re

import numpy as np

from .polytri import Cell

TAGS = ("D", "N")


class MeshParseError(ValueError):
    """Malformed mesh file."""


class TopologyError(ValueError):
    """Mesh is not a conforming triangulation of a polygonal domain."""


class Mesh:
    """Conforming triangulation with counterclockwise cells.

    Parameters
    ----------
    vertices : (nv, 2) array
    cells : (nt, 3) int array, counterclockwise
    tags : mapping from a vertex pair (any order) to ``'D'`` or ``'N'``;
        untagged boundary edges get ``default_tag`` (``None`` leaves them untagged).
    """

    def __init__(self, vertices, cells, tags=None, default_tag=None):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        self.cells = np.array(cells, dtype=int).reshape(-1, 3)
        nv = len(self.vertices)
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= nv):
            raise TopologyError("cell refers to a missing vertex")
        for k, c in enumerate(self.cells):
            if len(set(c.tolist())) != 3:
                raise TopologyError(f"cell {k} repeats a vertex")
            a = self.vertices[c]
            e1, e2 = a[1] - a[0], a[2] - a[0]
            if e1[0] * e2[1] - e1[1] * e2[0] <= 0.0:
                raise TopologyError(f"cell {k} is not counterclockwise")
        self._build_edges()
        self.tags = np.array([""] * len(self.edges), dtype=object)
        self.tags[self.boundary_edges] = default_tag if default_tag else "?"
        if tags:
            for (i, j), tag in dict(tags).items():
                self.set_tag(i, j, tag)
        self._check_conforming()

    # -- topology ---------------------------------------------------------------
    def _build_edges(self):
        index = {}
        edges = []
        cell_edges = np.zeros((len(self.cells), 3), dtype=int)
        edge_cells = []
        for k, c in enumerate(self.cells):
            for i in range(3):
                a, b = c[(i + 1) % 3], c[(i + 2) % 3]
                key = (min(a, b), max(a, b))
                if key not in index:
                    index[key] = len(edges)
                    edges.append(key)
                    edge_cells.append([])
                e = index[key]
                cell_edges[k, i] = e
                edge_cells[e].append(k)
        self.edges = np.array(edges, dtype=int).reshape(-1, 2)
        self._edge_index = index
        self.cell_edges = cell_edges
        self.edge_cells = [tuple(ec) for ec in edge_cells]
        for e, ec in enumerate(self.edge_cells):
            if len(ec) > 2:
                raise TopologyError(f"edge {tuple(self.edges[e])} is shared by {len(ec)} cells")
        self.boundary_edges = np.array([e for e, ec in enumerate(self.edge_cells) if len(ec) == 1],
                                       dtype=int)
        self.interior_edges = np.array([e for e, ec in enumerate(self.edge_cells) if len(ec) == 2],
                                       dtype=int)

    def _check_conforming(self):
        # a vertex lying in the interior of an edge it does not belong to means hanging nodes
        used = np.unique(self.cells)
        if len(used) != len(self.vertices):
            raise TopologyError("mesh has vertices that belong to no cell")
        V = self.vertices
        for e, (a, b) in enumerate(self.edges):
            pa, pb = V[a], V[b]
            d = pb - pa
            L2 = d @ d
            rel = V - pa
            t = rel @ d / L2
            dist = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / np.sqrt(L2)
            bad = (t > 1e-12) & (t < 1 - 1e-12) & (dist < 1e-12 * np.sqrt(L2))
            bad[[a, b]] = False
            if np.any(bad):
                raise TopologyError(f"hanging vertex on edge {(int(a), int(b))}")
        loops = self._boundary_loops()
        chi = len(self.vertices) - len(self.edges) + len(self.cells)
        if chi != 1 - (len(loops) - 1):
            raise TopologyError(
                f"Euler characteristic {chi} does not match {len(loops) - 1} holes")

    def edge_index(self, i, j):
        return self._edge_index[(min(i, j), max(i, j))]

    def set_tag(self, i, j, tag):
        if tag not in TAGS:
            raise ValueError(f"tag must be one of {TAGS}")
        e = self.edge_index(i, j)
        if len(self.edge_cells[e]) != 1:
            raise TopologyError(f"edge {(i, j)} is not a boundary edge")
        self.tags[e] = tag

    def with_tags(self, rule):
        """Copy with boundary tags replaced.

        ``rule`` is ``'D'``, ``'N'`` or a function of the edge midpoint returning one.
        """
        m = self.copy()
        for e in m.boundary_edges:
            if callable(rule):
                mid = m.vertices[m.edges[e]].mean(axis=0)
                m.tags[e] = rule(mid)
            else:
                m.tags[e] = rule
            if m.tags[e] not in TAGS:
                raise ValueError(f"invalid tag {m.tags[e]!r}")
        return m

    def copy(self):
        m = object.__new__(Mesh)
        m.__dict__.update(self.__dict__)
        m.tags = self.tags.copy()
        return m

    # -- geometry ---------------------------------------------------------------
    @property
    def nv(self):
        return len(self.vertices)

    @property
    def ne(self):
        return len(self.edges)

    @property
    def nt(self):
        return len(self.cells)

    def cell(self, k):
        return Cell(self.vertices[self.cells[k]])

    def cell_list(self):
        if getattr(self, "_cells_cache", None) is None:
            self._cells_cache = [self.cell(k) for k in range(self.nt)]
        return self._cells_cache

    def edge_frame(self, e):
        """Length, unit tangent and unit normal of edge ``e`` in its global orientation."""
        a, b = self.vertices[self.edges[e]]
        d = b - a
        L = float(np.hypot(*d))
        t = d / L
        return L, t, np.array([t[1], -t[0]])

    def h(self):
        return max(c.diameter for c in self.cell_list())

    def shape_regularity(self):
        """Smallest inradius-to-diameter ratio over all cells."""
        return min(c.inradius / c.diameter for c in self.cell_list())

    def euler_characteristic(self):
        return self.nv - self.ne + self.nt

    def outward_normal(self, e):
        """Outward unit normal of boundary edge ``e``."""
        k = self.edge_cells[e][0]
        i = list(self.cell_edges[k]).index(e)
        return self.cell(k).normals[i]

    # -- boundary loops -----------------------------------------------------------
    def _boundary_loops(self):
        """Boundary edges grouped into closed loops, each ordered along the boundary."""
        nxt = {}
        for e in self.boundary_edges:
            k = self.edge_cells[e][0]
            i = list(self.cell_edges[k]).index(e)
            c = self.cells[k]
            a, b = c[(i + 1) % 3], c[(i + 2) % 3]  # counterclockwise within the cell
            if a in nxt:
                raise TopologyError(f"boundary pinches at vertex {a}")
            nxt[a] = (b, e)
        seen = set()
        loops = []
        for start in sorted(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                if v not in nxt:
                    raise TopologyError("dangling boundary chain")
                w, e = nxt[v]
                loop.append(int(e))
                v = w
            if v != start:
                raise TopologyError("dangling boundary chain")
            loops.append(loop)
        V = self.vertices

        def key(loop):
            vs = self.edges[loop].ravel()
            pts = V[vs]
            o = np.lexsort((pts[:, 1], pts[:, 0]))[0]
            return (pts[o, 0], pts[o, 1])

        loops.sort(key=key)
        return loops

    def boundary_components(self):
        if getattr(self, "_loops_cache", None) is None:
            self._loops_cache = self._boundary_loops()
        return self._loops_cache

    # -- refinement -------------------------------------------------------------
    def refine_uniform(self):
        return refine_uniform(self)

    def __repr__(self):
        return f"Mesh(|V|={self.nv}, |E|={self.ne}, |T|={self.nt})"


@dataclass
class BoundaryTopology:
    M: int
    components: list
    I: list
    I_star: list
    gammaN_components: list = field(default_factory=list)
    gammaD_components: list = field(default_factory=list)

    @property
    def anchor(self):
        """Edge list of the traction component pinned to zero (or None)."""
        return self.gammaD_components[0] if self.gammaD_components else None


def _split_chains(loop, tags, tag):
    """Maximal runs of ``tag`` along a closed loop of edges."""
    flags = [tags[e] == tag for e in loop]
    if all(flags):
        return [list(loop)]
    if not any(flags):
        return []
    n = len(loop)
    start = next(i for i in range(n) if not flags[i])
    chains, cur = [], []
    for k in range(1, n + 1):
        i = (start + k) % n
        if flags[i]:
            cur.append(loop[i])
        elif cur:
            chains.append(cur)
            cur = []
    if cur:
        chains.append(cur)
    return chains


def boundary_topology(m, tags=None):
    """Boundary components, the index sets and the D/N chains of ``m``."""
    t = m.tags if tags is None else tags
    for e in m.boundary_edges:
        if t[e] not in TAGS:
            raise TopologyError(f"boundary edge {tuple(m.edges[e])} has no tag")
    loops = m.boundary_components()
    I = [k for k, loop in enumerate(loops) if any(t[e] == "N" for e in loop)]
    I_star = I[1:]
    gN = [c for loop in loops for c in _split_chains(loop, t, "N")]
    gD = [c for loop in loops for c in _split_chains(loop, t, "D")]
    gD.sort(key=min)
    gN.sort(key=min)
    return BoundaryTopology(M=len(loops) - 1, components=loops, I=I, I_star=I_star,
                            gammaN_components=gN, gammaD_components=gD)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def unit_triangle(tag="N"):
    return Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], default_tag=tag)


def crisscross(n=1, tag="N"):
    """Unit square, ``n x n`` squares each cut into four triangles through its centre."""
    if n < 1:
        raise ValueError("n must be at least 1")
    verts = [(i / n, j / n) for j in range(n + 1) for i in range(n + 1)]
    centre0 = len(verts)
    cells = []
    for j in range(n):
        for i in range(n):
            c = len(verts)
            verts.append(((i + 0.5) / n, (j + 0.5) / n))
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            cells += [(v00, v10, c), (v10, v11, c), (v11, v01, c), (v01, v00, c)]
    del centre0
    return Mesh(verts, cells, default_tag=tag)


def square_annulus(tag="N"):
    """Region between the squares [0,3]^2 and [1,2]^2 with eight cells."""
    verts = [(0, 0), (3, 0), (3, 3), (0, 3), (1, 1), (2, 1), (2, 2), (1, 2)]
    cells = [(0, 1, 5), (0, 5, 4), (1, 2, 6), (1, 6, 5), (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7)]
    return Mesh(verts, cells, default_tag=tag)


def read_mesh(path):
    """Parse the line-based ``tri-mesh v1`` format."""
    with open(path) as fh:
        return parse_mesh(fh.read())


def parse_mesh(text):
    verts, cells, tags = [], [], {}
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if re.fullmatch(r"tri-mesh\s+v1", line) is None:
                raise MeshParseError(f"line {lineno}: expected header 'tri-mesh v1'")
            header_seen = True
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "v" and len(parts) == 3:
                verts.append((float(parts[1]), float(parts[2])))
            elif kind == "t" and len(parts) == 4:
                cells.append(tuple(int(x) for x in parts[1:]))
            elif kind == "b" and len(parts) == 4:
                if parts[3] not in TAGS:
                    raise MeshParseError(f"line {lineno}: tag must be D or N, got {parts[3]!r}")
                tags[(int(parts[1]), int(parts[2]))] = parts[3]
            else:
                raise MeshParseError(f"line {lineno}: cannot parse {raw.strip()!r}")
        except ValueError as exc:
            if isinstance(exc, MeshParseError):
                raise
            raise MeshParseError(f"line {lineno}: {exc}") from exc
    if not header_seen:
        raise MeshParseError("line 1: missing header 'tri-mesh v1'")
    m = Mesh(verts, cells)
    for (i, j), tag in tags.items():
        try:
            m.set_tag(i, j, tag)
        except KeyError as exc:
            raise TopologyError(f"tagged pair {(i, j)} is not an edge") from exc
    return m


def write_mesh(m, path):
    lines = ["tri-mesh v1"]
    lines += [f"v {float(x)!r} {float(y)!r}" for x, y in m.vertices]
    lines += ["t %d %d %d" % tuple(c) for c in m.cells]
    for e in m.boundary_edges:
        if m.tags[e] in TAGS:
            a, b = m.edges[e]
            lines.append(f"b {a} {b} {m.tags[e]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def build_mesh(kind, n=1, tag="N"):
    """Mesh by name: ``unit_triangle``, ``crisscross`` (or ``crisscross(n)``),
    ``square_annulus``, or a path to a mesh file."""
    m = re.fullmatch(r"crisscross\((\d+)\)", kind)
    if m:
        return crisscross(int(m.group(1)), tag)
    if kind == "unit_triangle":
        return unit_triangle(tag)
    if kind == "crisscross":
        return crisscross(n, tag)
    if kind == "square_annulus":
        return square_annulus(tag)
    return read_mesh(kind)


def refine_uniform(m):
    """Split every cell into four by its edge midpoints; tags are inherited."""
    V = list(map(tuple, m.vertices))
    mid = {}
    for e, (a, b) in enumerate(m.edges):
        mid[e] = len(V)
        V.append(tuple(0.5 * (m.vertices[a] + m.vertices[b])))
    cells = []
    for k, c in enumerate(m.cells):
        e = m.cell_edges[k]  # e[i] is opposite c[i]
        m0, m1, m2 = mid[e[0]], mid[e[1]], mid[e[2]]
        cells += [(c[0], m2, m1), (m2, c[1], m0), (m1, m0, c[2]), (m0, m1, m2)]
    tags = {}
    for e in m.boundary_edges:
        if m.tags[e] in TAGS:
            a, b = m.edges[e]
            tags[(a, mid[e])] = m.tags[e]
            tags[(mid[e], b)] = m.tags[e]
    return Mesh(V, cells, tags=tags)
