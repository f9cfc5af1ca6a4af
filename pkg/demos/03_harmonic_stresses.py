"""Divergence-free stresses that are not Airy fields.

On the square annulus, with displacement data on both boundary loops, the
hole carries three independent self-equilibrated flux modes (two forces and a
moment). They show up as a three-dimensional gap between ker(div) and the
image of airy, and as an invertible 3x3 matrix of hole fluxes.
"""

import numpy as np

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk

m = mk.square_annulus()
for bc in ("displacement", "traction"):
    S, Q = fs.build_sigma(m, 3, bc), fs.build_q(m, 5, bc)
    rep = an.cohomology_report(S, Q)
    print(f"{bc:>12}: dim ker div = {rep.dim_ker_div}, rank airy = {rep.rank_airy}, "
          f"harmonic dimension = {rep.dim}")

S, Q = fs.build_sigma(m, 3), fs.build_q(m, 5)
h = an.harmonic_basis(S, Q)
F = an.hole_flux_rows(S) @ h.broken
print("hole fluxes of the harmonic basis (rows: x-force, y-force, moment):")
print(np.array2string(F, precision=4, suppress_small=True))
print(f"singular values: {np.linalg.svd(F, compute_uv=False)}")
