"""Inf-sup constants of the Hu-Zhang pair under p- and h-refinement.

beta is the square root of the smallest eigenvalue of B A^{-1} B^T p = nu C p,
where A is the H(div) Gram matrix of the stresses, B the divergence pairing and
C the displacement mass matrix. A stable pair keeps beta away from zero as the
degree grows and the mesh is refined.
"""

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk

print(f"{'mesh':>22} {'bc':>13} {'p':>2} {'dim S':>6} {'beta':>10}")
for name in ("unit_triangle", "square_annulus"):
    m = mk.build_mesh(name)
    for bc in ("displacement", "traction"):
        for p in range(3, 7):
            S, V = fs.build_sigma(m, p, bc), fs.build_v(m, p - 1, bc)
            beta = an.infsup_beta(an.assemble(S, V)).beta
            print(f"{name:>22} {bc:>13} {p:2d} {S.dim:6d} {beta:10.6f}")

m = mk.crisscross(1)
for level in range(3):
    S, V = fs.build_sigma(m, 3), fs.build_v(m, 2)
    print(f"{'crisscross h=' + format(m.h(), '.3g'):>22} {'displacement':>13}  3 {S.dim:6d} "
          f"{an.infsup_beta(an.assemble(S, V)).beta:10.6f}")
    m = m.refine_uniform()
