"""Mixed elasticity with nearly incompressible material.

A polynomial displacement of degree p-1 is reproduced exactly by the
Hellinger-Reissner pair, whatever the ratio of the Lame constants. The
stress error grows only through the conditioning of the compliance block,
not through locking of the discretisation.
"""

import numpy as np

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk
from hzcomplex.polytri import PolyField, nmono

rng = np.random.default_rng(5)
m = mk.crisscross(2)
p = 4
S, V = fs.build_sigma(m, p, "displacement"), fs.build_v(m, p - 1, "displacement")
u = PolyField.from_physical("vector2", p - 1, rng.standard_normal((2, nmono(p - 1))))
for ratio in (1.0, 1e2, 1e4, 1e6, 1e8):
    sigma, f = an.manufactured_elasticity(u, 1.0, ratio)
    sol = an.solve_hellinger_reissner(S, V, 1.0, ratio, f, g=u)
    exact = an.broken_projection(m, sigma, p)
    err = an.hdiv_norm_broken(m, p, S.basis @ sol.sigma - exact) / an.hdiv_norm_broken(m, p, exact)
    print(f"lambda/mu = {ratio:8.0e}: relative H(div) stress error {err:.2e}, residual {sol.residual:.1e}")
