"""Verification suites: named checks with a measured value and a threshold.

Each suite returns a list of :class:`Check` records; the command line wraps
them into a JSON report and the acceptance tests assert on them.
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis as an
from . import fespaces as fs
from . import meshkit as mk
from . import polytri as pt
from . import refpoincare as rp
from .polytri import PolyField, apply_diff, nmono

SUITES = ("poincare", "spaces", "exactness", "projections", "hodge", "elasticity")


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    kind: str = "max"  # "max": value <= threshold, "min": value >= threshold, "eq": value == threshold

    def as_dict(self):
        d = asdict(self)
        d["value"] = float(d["value"]) if d["kind"] != "eq" else d["value"]
        return d


def upper(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value <= threshold), "max")


def lower(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value >= threshold), "min")


def equal(name, value, expected):
    return Check(name, int(value), int(expected), int(value) == int(expected), "eq")


# ---------------------------------------------------------------------------
# random inputs on the reference triangle
# ---------------------------------------------------------------------------

REF = rp.REF


def _random_onb(rng, shape, p, K=REF):
    n = pt.SHAPE_COMPONENTS[shape] * nmono(p)
    return pt.field_from_onb(rng.standard_normal(n), shape, p, K)


def random_rm_free(rng, p, K=REF):
    """Random vector field of degree ``p`` orthogonal to rigid motions."""
    u = _random_onb(rng, "vector2", max(p, 1), K)
    un, _ = rp.project_off_rm(u, K)
    return un.truncate(p) if p >= 1 else un


def random_clamped(rng, p, K=REF):
    """Random ``b^2 psi`` with ``psi`` of degree ``p`` (``b`` the cubic bubble)."""
    b = K.bubble()
    return b * b * _random_onb(rng, "scalar", p, K)


def random_bubble_stress(rng, p, K=REF):
    """Random symmetric field of degree ``p`` with vanishing normal trace."""
    fields = fs.interior_space_fields(p, K)
    c = rng.standard_normal(len(fields))
    out = fields[0] * c[0]
    for a, f in zip(c[1:], fields[1:]):
        out = out + f * a
    return out


def _rel(f, g, K=REF):
    """``||f - g|| / ||g||`` in L2(K)."""
    d = max(f.degree, g.degree)
    diff = f.raise_degree(d).reframe(K.frame) - g.raise_degree(d).reframe(K.frame)
    return np.sqrt(pt.l2_inner(diff, diff, K)) / max(np.sqrt(pt.l2_inner(g, g, K)), 1e-300)


def homotopy_residuals(p, rng):
    """The three homotopy residuals and two degree-growth fractions for one sample."""
    u = random_rm_free(rng, p)
    P2u = rp.p2(u)
    r_div = _rel(apply_diff("div_tensor", P2u), u)
    q = random_clamped(rng, p)
    P1q = rp.p1(apply_diff("airy", q))
    r_airy = _rel(P1q, q)
    s = random_bubble_stress(rng, p + 2)
    P1s = rp.p1(s)
    P2d = rp.p2(apply_diff("div_tensor", s), ref_norm=np.sqrt(pt.l2_inner(s, s, REF)))
    recon = apply_diff("airy", P1s).raise_degree(s.degree) + P2d.raise_degree(s.degree)
    r_hom = _rel(recon, s)
    g1 = pt.high_degree_fraction(P1s, s.degree + 2, REF)
    g2 = pt.high_degree_fraction(P2u, u.degree + 1, REF)
    return r_div, r_airy, r_hom, g1, g2


def poincare_suite(degrees=range(0, 7), samples=50, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for p in degrees:
        res = np.array([homotopy_residuals(p, rng) for _ in range(samples)])
        worst = res.max(axis=0)
        checks += [
            upper(f"p={p}: div P2 u = u", worst[0], 1e-9),
            upper(f"p={p}: P1 airy q = q", worst[1], 1e-8),
            upper(f"p={p}: airy P1 + P2 div = I", worst[2], 1e-8),
            upper(f"p={p}: P1 degree growth <= 2", worst[3], 1e-10),
            upper(f"p={p}: P2 degree growth <= 1", worst[4], 1e-10),
        ]
    return checks


# ---------------------------------------------------------------------------
# mesh-level suites
# ---------------------------------------------------------------------------

BUILTIN = ("unit_triangle", "crisscross", "square_annulus")


def spaces_suite(meshes=BUILTIN, degrees=(3, 4, 5, 6), bcs=("none", "traction")):
    checks = []
    for name in meshes:
        m = mk.build_mesh(name)
        for bc in bcs:
            for p in degrees:
                rep = fs.euler_dimension_check(m, p, bc, strict=False)
                checks.append(equal(f"{name} {bc} p={p}: Euler identity defect", rep.defect, 0))
        S = fs.build_sigma(m, 3)
        conf = fs.conformity_report(S)
        checks.append(upper(f"{name}: Hu-Zhang trace jumps", max(conf.values()), 1e-10))
    return checks


def exactness_suite(meshes=BUILTIN, degrees=(3, 4, 5), bcs=("none", "traction"), aw=False):
    checks = []
    for name in meshes:
        m = mk.build_mesh(name)
        for bc in bcs:
            topo = mk.boundary_topology(m, fs.effective_tags(m, bc))
            expected = 3 * len(topo.I_star)
            for p in degrees:
                S = fs.build_sigma(m, p, bc)
                Q = fs.build_q(m, p + 2, bc)
                if aw:
                    S = an.arnold_winther_variant(S, materialize=True)
                    S = fs.FESpace(m, "sigma_aw", p, bc, "symmatrix2", S.basis, S.tags)
                rep = an.cohomology_report(S, Q)
                tag = f"{name} {bc} p={p}"
                checks.append(equal(f"{tag}: cohomology dimension", rep.dim, expected))
                checks.append(lower(f"{tag}: singular-value gap (div)", rep.gap_div, 1e4))
                checks.append(lower(f"{tag}: singular-value gap (airy)", rep.gap_airy, 1e4))
    return checks


def _random_global(rng, shape, degree):
    return PolyField.from_physical(shape, degree,
                                   rng.standard_normal((pt.SHAPE_COMPONENTS[shape], nmono(degree))))


def projection_residuals(S, Q, V, rng):
    """Commutation, idempotence and norm residuals for one manufactured pair."""
    m, p = S.mesh, S.degree
    q = _random_global(rng, "scalar", p + 2)
    sig = _random_global(rng, "symmatrix2", p)
    H = fs.airy_matrix(m, Q.degree) @ Q.basis
    D = fs.div_matrix(m, p) @ S.basis
    cq = an.project_q(Q, q)
    sa = an.project_sigma(S, Q, V, apply_diff("airy", q))
    Hc = H @ cq
    r_airy = np.linalg.norm(S.basis @ sa - Hc) / max(np.linalg.norm(Hc), 1e-300)
    s = an.project_sigma(S, Q, V, sig)
    dv = an.project_v(V, apply_diff("div_tensor", sig))
    Vd = V.basis @ dv
    r_div = np.linalg.norm(D @ s - an._v_columns(V, p - 1) @ dv) / max(np.linalg.norm(Vd), 1e-300)
    idem_s = np.linalg.norm(an.project_sigma_coords(S, Q, V, s) - s) / max(np.linalg.norm(s), 1e-300)
    # Pi_V acting on a random broken field, then again on its output
    vb = rng.standard_normal(V.n_broken)
    Pv = np.asarray(V.basis.T @ vb).ravel()
    ray = np.linalg.norm(V.basis @ Pv) / np.linalg.norm(vb)
    idem_v = np.linalg.norm(V.basis.T @ (V.basis @ Pv) - Pv) / max(np.linalg.norm(Pv), 1e-300)
    return r_airy, r_div, max(idem_s, idem_v), ray


def projections_suite(meshes=BUILTIN, p=3, samples=10, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for name in meshes:
        m = mk.build_mesh(name)
        S, Q, V = fs.build_sigma(m, p), fs.build_q(m, p + 2), fs.build_v(m, p - 1)
        res = np.array([projection_residuals(S, Q, V, rng) for _ in range(samples)]).max(axis=0)
        checks += [
            upper(f"{name}: airy commutes with projections", res[0], 1e-8),
            upper(f"{name}: div commutes with projections", res[1], 1e-8),
            upper(f"{name}: idempotence", res[2], 1e-9),
            upper(f"{name}: Pi_V Rayleigh quotient", res[3], 1 + 1e-10),
        ]
    return checks


def hodge_constants(m, bc, degrees, samples, rng):
    """Worst reconstruction residual, phi3 residuals and the two measured constants per degree."""
    S3, Q3 = fs.build_sigma(m, 3, bc), fs.build_q(m, 5, bc)
    h3 = an.harmonic_basis(S3, Q3)
    out = {}
    for p in degrees:
        S, Q = fs.build_sigma(m, p, bc), fs.build_q(m, p + 2, bc)
        rec, phi_res, c_tau, c_pot = 0.0, 0.0, 0.0, 0.0
        for _ in range(samples):
            s = rng.standard_normal(S.dim)
            hp = an.hodge_decompose(S, Q, h3, s)
            rec = max(rec, hp.residuals["reconstruction"])
            phi_b = h3.broken @ hp.phi3
            phi_res = max(phi_res, phi3_membership(S3, Q3, phi_b))
            n = hp.norms
            c_tau = max(c_tau, n["tau_div"] / max(n["div_sigma"], 1e-300))
            c_pot = max(c_pot, (n["phi3"] + n["q_h2"]) / n["sigma_div"])
        out[p] = (rec, phi_res, c_tau, c_pot)
    return out


def phi3_membership(S3, Q3, phi_b):
    """Defining residuals of the degree-3 harmonic space for a broken field.

    The largest of: distance from the conforming stress space, size of the
    divergence and size of the Airy component, relative to the field.
    """
    nrm = max(np.linalg.norm(phi_b), 1e-300)
    if np.linalg.norm(phi_b) == 0.0:
        return 0.0
    B = S3.dense_basis()
    c = np.linalg.lstsq(B, phi_b, rcond=None)[0]
    r_conf = np.linalg.norm(B @ c - phi_b) / nrm
    r_div = np.linalg.norm(fs.div_matrix(S3.mesh, 3) @ phi_b) / nrm
    H = an.la.range_basis(an._to_dense(fs.airy_matrix(S3.mesh, 5) @ Q3.basis))
    r_airy = np.linalg.norm(H.T @ phi_b) / nrm
    return max(r_conf, r_div, r_airy)


def hodge_suite(configs=(("crisscross", "none"), ("square_annulus", "none"),
                         ("square_annulus", "traction")),
                degrees=(3, 4, 5, 6), samples=20, seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for name, bc in configs:
        m = mk.build_mesh(name)
        res = hodge_constants(m, bc, degrees, samples, rng)
        tag = f"{name} {bc}"
        checks.append(upper(f"{tag}: reconstruction", max(r[0] for r in res.values()), 1e-8))
        checks.append(upper(f"{tag}: phi3 in degree-3 harmonic space",
                            max(r[1] for r in res.values()), 1e-9))
        for j, label in ((2, "div-part constant"), (3, "potential constant")):
            vals = [r[j] for r in res.values()]
            checks.append(upper(f"{tag}: {label} spread over p", max(vals) / min(vals), 4.0))
    return checks


def patch_test(m, p, mu, lam, rng):
    """H(div) error and solver residual for a manufactured polynomial displacement."""
    S, V = fs.build_sigma(m, p, "displacement"), fs.build_v(m, p - 1, "displacement")
    u = _random_global(rng, "vector2", p - 1)
    sig, f = an.manufactured_elasticity(u, mu, lam)
    sol = an.solve_hellinger_reissner(S, V, mu, lam, f, g=u)
    ex = an.broken_projection(m, sig, p)
    err = an.hdiv_norm_broken(m, p, S.basis @ sol.sigma - ex) / an.hdiv_norm_broken(m, p, ex)
    return err, sol.residual


def elasticity_suite(meshes=("unit_triangle", "crisscross"), degrees=(3, 4),
                     ratios=(1.0, 1e3, 1e6), seed=0):
    rng = np.random.default_rng(seed)
    checks = []
    for name in meshes:
        m = mk.build_mesh(name)
        for p in degrees:
            for r in ratios:
                err, res = patch_test(m, p, 1.0, r, rng)
                tag = f"{name} p={p} lambda/mu={r:g}"
                checks.append(upper(f"{tag}: H(div) error", err, 1e-8))
                checks.append(upper(f"{tag}: solver residual", res, 1e-9))
    return checks


def run_suite(name, seed=0):
    if name not in SUITES:
        raise KeyError(name)
    t = time.perf_counter()
    if name == "poincare":
        checks = poincare_suite(seed=seed)
    elif name == "spaces":
        checks = spaces_suite()
    elif name == "exactness":
        checks = exactness_suite()
    elif name == "projections":
        checks = projections_suite(seed=seed)
    elif name == "hodge":
        checks = hodge_suite(seed=seed)
    else:
        checks = elasticity_suite(seed=seed)
    return checks, time.perf_counter() - t
