"""Splitting a stress into harmonic, Airy and divergence-carrying parts.

The harmonic part is taken from the lowest-degree space (p = 3) even when the
stress has higher degree; the price is that the three pieces are no longer
orthogonal. We print the reconstruction error and the two ratios that measure
how much the split amplifies norms.
"""

import numpy as np

from hzcomplex import analysis as an
from hzcomplex import fespaces as fs
from hzcomplex import meshkit as mk

rng = np.random.default_rng(3)
m = mk.square_annulus()
h3 = an.harmonic_basis(fs.build_sigma(m, 3), fs.build_q(m, 5))
for p in range(3, 7):
    S, Q = fs.build_sigma(m, p), fs.build_q(m, p + 2)
    parts = an.hodge_decompose(S, Q, h3, rng.standard_normal(S.dim))
    n = parts.norms
    print(f"p={p}: reconstruction {parts.residuals['reconstruction']:.1e}, "
          f"|tau|_div/|div s| = {n['tau_div'] / n['div_sigma']:.3f}, "
          f"(|phi3| + |q|_H2)/|s|_div = {(n['phi3'] + n['q_h2']) / n['sigma_div']:.3f}")
