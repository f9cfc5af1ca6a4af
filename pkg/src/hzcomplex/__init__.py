"""Finite element spaces for the two-dimensional stress elasticity complex.

The discrete sequence is

    Q (C1 potentials, degree p+2)  --airy-->  Sigma (Hu-Zhang stresses, degree p)
                                   --div-->   V (discontinuous displacements, degree p-1)

with polynomial-preserving right inverses on a single triangle, inf-sup and
cohomology computations, commuting projections, a Hodge splitting and a
mixed elasticity solver.
"""

from .analysis import (
    arnold_winther_variant, assemble, cohomology_dim, harmonic_basis, hodge_decompose,
    infsup_beta, min_norm_div_inverse, project_q, project_sigma, project_v,
    solve_hellinger_reissner,
)
from .fespaces import build_q, build_sigma, build_v, euler_dimension_check
from .meshkit import Mesh, boundary_topology, build_mesh, crisscross, square_annulus, unit_triangle
from .polytri import Cell, PolyField
from .refpoincare import invert_div_cell, p1, p2

__version__ = "0.1.0"
