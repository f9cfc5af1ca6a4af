"""Command-line entry point: inf-sup sweeps, verification suites and small solves.

Exit status is 0 on success, 2 for configuration errors (bad mesh, degree
range, boundary mode, suite name) and 3 for numerical failures (including
failed verification checks).
"""

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from . import fespaces as fs
from . import linalg_core as la
from . import meshkit as mk
from . import suites

SCHEMA_VERSION = "1.0"
P_MAX = 12
BC_ALIASES = {"displacement": "displacement", "traction": "traction", "file-tags": "mixed"}
COMMANDS = ("infsup", "verify", "hodge", "solve", "complex-check")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    meshes: list
    degrees: list
    bcs: list
    refine: int = 0
    out: str = None
    seed: int = 0
    tol: float = la.DEFAULT_RANK_TOL
    suite: str = None
    variant: str = "hu-zhang"
    samples: int = 5
    mu: float = 1.0
    ratios: list = field(default_factory=lambda: [1.0, 1e3, 1e6])


def parse_degrees(text):
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", text)
    if m is None:
        raise ConfigError(f"cannot parse degree range {text!r}; use 'a..b' or 'a'")
    a = int(m.group(1))
    b = int(m.group(2)) if m.group(2) is not None else a
    degrees = list(range(a, b + 1))
    if not degrees:
        raise ConfigError(f"empty degree range {text!r}")
    if a < 3 or b > P_MAX:
        raise ConfigError(f"degrees must lie in [3, {P_MAX}]")
    return degrees


def parse_bcs(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part not in BC_ALIASES:
            raise ConfigError(f"unknown boundary mode {part!r}; choose from {sorted(BC_ALIASES)}")
        out.append(BC_ALIASES[part])
    return out


def load_mesh(spec):
    try:
        return mk.build_mesh(spec)
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown mesh {spec!r} (not a built-in name or readable file)") from exc
    except (mk.MeshParseError, mk.TopologyError) as exc:
        raise ConfigError(f"mesh {spec!r}: {exc}") from exc


def mesh_levels(spec, refine, sweep):
    """``(label, level, mesh)`` for the requested refinements."""
    m = load_mesh(spec)
    levels = [(0, m)]
    for r in range(1, refine + 1):
        m = m.refine_uniform()
        levels.append((r, m))
    return levels if sweep else levels[-1:]


def check_bc(mesh, bc, spec):
    try:
        fs.effective_tags(mesh, bc)
    except ValueError as exc:
        raise ConfigError(f"mesh {spec!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def to_json(payload):
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _spaces(mesh, p, bc, variant):
    S = fs.build_sigma(mesh, p, bc)
    if variant == "arnold-winther":
        return an.arnold_winther_variant(S, materialize=False), fs.build_v(mesh, p - 2, bc)
    return S, fs.build_v(mesh, p - 1, bc)


def _dim(S):
    return an.aw_dim(S) if S.parent is not None else S.dim


def cmd_infsup(cfg):
    rows = []
    for spec in cfg.meshes:
        for level, m in mesh_levels(spec, cfg.refine, sweep=True):
            for bc in cfg.bcs:
                check_bc(m, bc, spec)
                for p in cfg.degrees:
                    S, V = _spaces(m, p, bc, cfg.variant)
                    r = an.infsup_beta(an.assemble(S, V))
                    rows.append([spec, level, bc, m.h(), p, _dim(S), V.dim, r.beta, r.nu, r.residual])
    header = ["mesh", "refine", "bc", "h", "p", "dim_sigma", "dim_v", "beta", "nu", "residual"]
    return to_csv(header, rows), 0


def cmd_complex_check(cfg):
    records = []
    ok = True
    for spec in cfg.meshes:
        for level, m in mesh_levels(spec, cfg.refine, sweep=False):
            for bc in cfg.bcs:
                check_bc(m, bc, spec)
                topo = mk.boundary_topology(m, fs.effective_tags(m, bc))
                for p in cfg.degrees:
                    S = fs.build_sigma(m, p, bc)
                    Q = fs.build_q(m, p + 2, bc, tol=cfg.tol)
                    V = fs.build_v(m, p - 1, bc)
                    eul = fs.euler_dimension_check(m, p, bc, spaces=(S, Q, V), strict=False)
                    if cfg.variant == "arnold-winther":
                        aw = an.arnold_winther_variant(S, materialize=True)
                        S = fs.FESpace(m, "sigma_aw", p, bc, "symmatrix2", aw.basis, aw.tags)
                        V = fs.build_v(m, p - 2, bc)
                    coh = an.cohomology_report(S, Q, cfg.tol)
                    beta = an.infsup_beta(an.assemble(S, V))
                    expected = 3 * len(topo.I_star)
                    passed = bool(coh.dim == expected and (cfg.variant != "hu-zhang" or eul.holds))
                    ok &= passed
                    records.append({
                        "mesh": spec, "refine": level, "bc": bc, "p": p, "variant": cfg.variant,
                        "dim_sigma": S.dim, "dim_q": Q.dim, "dim_v": V.dim,
                        "hole_term": eul.hole_term, "p1_gamma": eul.p1_gamma,
                        "euler_identity": bool(eul.holds),
                        "cohomology_dim": coh.dim, "expected_cohomology_dim": expected,
                        "gap_div": _finite(coh.gap_div), "gap_airy": _finite(coh.gap_airy),
                        "beta": beta.beta, "passed": passed,
                    })
    return to_json({"command": "complex-check", "rank_tol": cfg.tol, "results": records}), 0 if ok else 3


def _finite(x):
    return float(x) if np.isfinite(x) else None


def cmd_verify(cfg):
    if cfg.suite not in suites.SUITES and cfg.suite != "all":
        raise ConfigError(f"unknown suite {cfg.suite!r}; choose from {list(suites.SUITES) + ['all']}")
    names = suites.SUITES if cfg.suite == "all" else (cfg.suite,)
    reports = []
    ok = True
    for name in names:
        checks, elapsed = suites.run_suite(name, seed=cfg.seed)
        passed = all(c.passed for c in checks)
        ok &= passed
        print(f"{name}: {len(checks)} checks, {'pass' if passed else 'FAIL'} ({elapsed:.1f} s)",
              file=sys.stderr)
        reports.append({"suite": name, "passed": passed, "checks": [c.as_dict() for c in checks]})
    return to_json({"command": "verify", "seed": cfg.seed, "passed": ok, "suites": reports}), 0 if ok else 3


def cmd_hodge(cfg):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for spec in cfg.meshes:
        for level, m in mesh_levels(spec, cfg.refine, sweep=False):
            for bc in cfg.bcs:
                check_bc(m, bc, spec)
                res = suites.hodge_constants(m, bc, cfg.degrees, cfg.samples, rng)
                for p in cfg.degrees:
                    rec, phi_res, c_tau, c_pot = res[p]
                    rows.append([spec, level, bc, m.h(), p, rec, phi_res, c_tau, c_pot])
    header = ["mesh", "refine", "bc", "h", "p", "reconstruction", "phi3_residual",
              "div_part_constant", "potential_constant"]
    return to_csv(header, rows), 0


def cmd_solve(cfg):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for bc in cfg.bcs:
        if bc != "displacement":
            raise ConfigError("solve runs the displacement patch test; use --bc displacement")
    for spec in cfg.meshes:
        for level, m in mesh_levels(spec, cfg.refine, sweep=False):
            for p in cfg.degrees:
                for r in cfg.ratios:
                    err, res = suites.patch_test(m, p, cfg.mu, r * cfg.mu, rng)
                    rows.append([spec, level, m.h(), p, r, err, res])
    header = ["mesh", "refine", "h", "p", "lambda_over_mu", "hdiv_error", "residual"]
    return to_csv(header, rows), 0


HANDLERS = {"infsup": cmd_infsup, "verify": cmd_verify, "hodge": cmd_hodge,
            "solve": cmd_solve, "complex-check": cmd_complex_check}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    ap = _Parser(prog="hzcomplex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, default_p="3..5"):
        sp.add_argument("--mesh", action="append",
                        help="built-in name (unit_triangle, crisscross(n), square_annulus) or mesh file; repeatable")
        sp.add_argument("--p", default=default_p, help="degree range 'a..b'")
        sp.add_argument("--bc", default="displacement",
                        help="displacement, traction or file-tags; comma-separated for several")
        sp.add_argument("--refine", type=int, default=0, help="uniform refinements")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=la.DEFAULT_RANK_TOL, help="numerical rank tolerance")

    sp = sub.add_parser("infsup", help="inf-sup constants; --refine n sweeps levels 0..n")
    common(sp)
    sp.add_argument("--variant", choices=("hu-zhang", "arnold-winther"), default="hu-zhang")
    sp = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    sp.add_argument("suite", help=f"one of {', '.join(suites.SUITES)} or all")
    common(sp)
    sp = sub.add_parser("hodge", help="Hodge decomposition residuals and constants")
    common(sp, "3..6")
    sp.add_argument("--samples", type=int, default=5)
    sp = sub.add_parser("solve", help="Hellinger-Reissner patch test with manufactured data")
    common(sp, "3..4")
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--ratios", default="1,1e3,1e6", help="comma-separated lambda/mu values")
    sp = sub.add_parser("complex-check", help="dimensions, Euler identity, cohomology and beta")
    common(sp)
    sp.add_argument("--variant", choices=("hu-zhang", "arnold-winther"), default="hu-zhang")
    return ap


def config_from_args(ns):
    if ns.refine < 0:
        raise ConfigError("--refine must be non-negative")
    if ns.tol <= 0:
        raise ConfigError("--tol must be positive")
    cfg = RunConfig(
        command=ns.command,
        meshes=ns.mesh or ["unit_triangle"],
        degrees=parse_degrees(ns.p),
        bcs=parse_bcs(ns.bc),
        refine=ns.refine, out=ns.out, seed=ns.seed, tol=ns.tol,
    )
    cfg.suite = getattr(ns, "suite", None)
    cfg.variant = getattr(ns, "variant", "hu-zhang")
    cfg.samples = getattr(ns, "samples", cfg.samples)
    cfg.mu = getattr(ns, "mu", cfg.mu)
    if hasattr(ns, "ratios"):
        try:
            cfg.ratios = [float(x) for x in ns.ratios.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --ratios {ns.ratios!r}") from exc
    if cfg.samples < 1 or cfg.mu <= 0 or any(r <= 0 for r in cfg.ratios):
        raise ConfigError("samples, mu and ratios must be positive")
    return cfg


NUMERICAL_ERRORS = (np.linalg.LinAlgError, an.SurjectivityError, an.ExactnessError, an.RangeError,
                    fs.UnisolvencyError, fs.DimensionMismatch, FloatingPointError, RuntimeError)


def main(argv=None):
    try:
        cfg = config_from_args(build_parser().parse_args(argv))
        text, code = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"hzcomplex: configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"hzcomplex: numerical failure: {exc}", file=sys.stderr)
        return 3
    try:
        emit(text, cfg.out)
    except OSError as exc:
        print(f"hzcomplex: cannot write output: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
