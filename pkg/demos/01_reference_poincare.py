"""Right inverses of div and airy on one triangle.

We draw a random symmetric tensor with vanishing normal trace, split it with
the two Poincare operators, and check that the pieces add back up. Then we
show that the operators raise the polynomial degree by a fixed amount only.
"""

import numpy as np

from hzcomplex import polytri as pt
from hzcomplex import refpoincare as rp
from hzcomplex.polytri import apply_diff
from hzcomplex.suites import random_bubble_stress, random_rm_free

K = rp.REF
rng = np.random.default_rng(1)


def norm(f):
    return np.sqrt(pt.l2_inner(f, f, K))


sigma = random_bubble_stress(rng, 5)
q = rp.p1(sigma)
s2 = rp.p2(apply_diff("div_tensor", sigma), ref_norm=norm(sigma))
rest = sigma - apply_diff("airy", q).raise_degree(5) - s2.raise_degree(5)
print(f"sigma of degree {sigma.degree}: airy part from a potential of degree {q.degree}")
print(f"  relative error of airy P1 + P2 div = I: {norm(rest) / norm(sigma):.2e}")

for p in range(0, 6):
    u = random_rm_free(rng, p)
    s = rp.p2(u)
    err = norm(apply_diff("div_tensor", s) - u.raise_degree(s.degree - 1)) / norm(u)
    print(f"  p={p}: div P2 u = u to {err:.1e}, "
          f"mass above degree {u.degree + 1}: {pt.high_degree_fraction(s, u.degree + 1, K):.1e}")
