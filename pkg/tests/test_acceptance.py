"""Acceptance criteria, one test each, at the required tolerances."""

import time

import numpy as np
import pytest

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk
from hzcomplex import refpoincare as rp
from hzcomplex import suites
from hzcomplex.polytri import Cell, PolyField

BUILTIN = ("unit_triangle", "crisscross", "square_annulus")


@pytest.fixture(scope="module")
def homotopy_samples():
    """50 seeded samples per degree 0..6 on the reference triangle, with elapsed time."""
    rng = np.random.default_rng(0)
    t = time.perf_counter()
    res = {p: np.array([suites.homotopy_residuals(p, rng) for _ in range(50)]) for p in range(7)}
    return res, time.perf_counter() - t


def test_1_homotopy_identities(homotopy_samples):
    res, elapsed = homotopy_samples
    for p, r in res.items():
        assert r[:, 0].max() <= 1e-9, f"div P2 u - u at p={p}"
        assert r[:, 1].max() <= 1e-8, f"P1 airy q - q at p={p}"
        assert r[:, 2].max() <= 1e-8, f"airy P1 + P2 div - I at p={p}"
    assert elapsed < 30.0


def test_2_polynomial_preservation(homotopy_samples):
    res, _ = homotopy_samples
    for p, r in res.items():
        assert r[:, 3].max() < 1e-10, f"P1 degree growth at p={p}"
        assert r[:, 4].max() < 1e-10, f"P2 degree growth at p={p}"


def test_3_dimension_formulas():
    assert fs.build_sigma(mk.unit_triangle(), 3).dim == 30
    assert fs.build_sigma(mk.crisscross(1), 3).dim == 83
    ref = Cell.reference()
    assert len(fs.interior_space_fields(3, ref)) == 9 == 3 * 3 * 2 // 2
    assert fs.build_sigma(mk.Mesh(ref.vertices, [[0, 1, 2]], default_tag="D"), 3, "traction").dim == 9
    for name in BUILTIN:
        m = mk.build_mesh(name)
        for bc in ("none", "traction"):
            for p in (3, 4, 5, 6):
                rep = fs.euler_dimension_check(m, p, bc, strict=False)
                assert rep.defect == 0, f"{name} {bc} p={p}: {rep}"


def _exactness_checks(aw):
    checks = suites.exactness_suite(meshes=BUILTIN, degrees=(3, 4, 5), bcs=("none", "traction"), aw=aw)
    failed = [c for c in checks if not c.passed]
    assert not failed, failed
    dims = {c.name: c.value for c in checks if c.name.endswith("cohomology dimension")}
    assert dims["square_annulus none p=3: cohomology dimension"] == 3
    assert dims["square_annulus traction p=5: cohomology dimension"] == 0
    assert dims["crisscross traction p=4: cohomology dimension"] == 0


def test_4_exactness_and_cohomology():
    _exactness_checks(aw=False)


def _infsup_sweep(variant):
    t = time.perf_counter()
    configs = [("unit_triangle", mk.unit_triangle(), "displacement"),
               ("unit_triangle", mk.unit_triangle(), "traction")]
    m = mk.crisscross(1)
    for level in range(3):
        configs.append((f"crisscross(1) x{level}", m, "displacement"))
        m = m.refine_uniform()
    for label, mesh, bc in configs:
        betas = []
        for p in range(3, 9):
            S = fs.build_sigma(mesh, p, bc)
            if variant == "aw":
                S, V = an.arnold_winther_variant(S, materialize=False), fs.build_v(mesh, p - 2, bc)
            else:
                V = fs.build_v(mesh, p - 1, bc)
            r = an.infsup_beta(an.assemble(S, V))
            assert 0.1 <= r.beta <= 1 + 1e-10, f"{label} {bc} p={p}: beta={r.beta}"
            assert r.residual <= 1e-8
            betas.append(r.beta)
        assert max(betas) / min(betas) <= 2.0, f"{label} {bc}: {betas}"
    assert time.perf_counter() - t < 300.0


def test_5_infsup():
    _infsup_sweep("hz")


def test_6_commuting_projections():
    checks = suites.projections_suite(meshes=BUILTIN, p=3, samples=10, seed=0)
    failed = [c for c in checks if not c.passed]
    assert not failed, failed
    assert len(checks) == 4 * len(BUILTIN)


def test_7_hodge_decomposition():
    rng = np.random.default_rng(7)
    for name, bc in (("crisscross", "none"), ("square_annulus", "none"), ("square_annulus", "traction")):
        res = suites.hodge_constants(mk.build_mesh(name), bc, (3, 4, 5, 6), 20, rng)
        for p, (rec, phi_res, _, _) in res.items():
            assert rec <= 1e-8, f"{name} {bc} p={p}"
            assert phi_res <= 1e-9, f"{name} {bc} p={p}"
        for j in (2, 3):
            vals = [r[j] for r in res.values()]
            assert max(vals) / min(vals) <= 4.0, f"{name} {bc}: {vals}"


def test_8_element_local_inversion():
    rng = np.random.default_rng(8)
    for aspect in (1.0, 2.0, 4.0):
        base = np.array([[0.0, 0.0], [aspect, 0.0], [0.3 * aspect, 1.0]])
        c = rng.standard_normal((2, 10))
        consts = []
        for h in (1.0, 0.5, 0.25):
            K = Cell(base * h)
            u = PolyField("vector2", 3, c, K.frame)  # same data pulled back to the standard chart
            u, _ = rp.project_off_rm(u, K)
            _, rep = rp.invert_div_cell(u, K, report=True)
            assert rep["div_residual"] <= 1e-9
            assert rep["trace_residual"] <= 1e-9
            consts.append(rep["scaling"])
        assert max(consts) / min(consts) <= 2.0, consts


def test_9_hellinger_reissner_patch():
    rng = np.random.default_rng(9)
    for name in ("unit_triangle", "crisscross"):
        m = mk.build_mesh(name)
        for p in (3, 4):
            for ratio in (1.0, 1e3, 1e6):
                err, res = suites.patch_test(m, p, 1.0, ratio, rng)
                assert err <= 1e-8, f"{name} p={p} lambda/mu={ratio}: {err}"
                assert res <= 1e-9


def test_10_arnold_winther_variant():
    _exactness_checks(aw=True)
    _infsup_sweep("aw")
