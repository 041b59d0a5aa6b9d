"""Bounds for normalized sums n^(-1/2) (xi_1 + ... + xi_n).

Run: python3 demos/normalized_sums.py   (about 10 s)
"""

import numpy as np

from chainbound.bounds import theorem1_bound, theorem2_bound
from chainbound.chaining import k_profile
from chainbound.phi import phi_n, power_type, subgaussian, zeta
from chainbound.presets import independent_space
from chainbound.sim import empirical_tail, sample_normalized_sum

# lam^2/2 is unchanged by the n phi(lam / sqrt n) rescaling, so the bound
# for the sum is the single-field bound.
space = independent_space(8)
prof = k_profile(space)
a = theorem1_bound(space, prof, subgaussian(), 0.5, 4.0)
b = theorem2_bound(space, prof, subgaussian(), 0.5, 4.0, ("fixed", 100))
print("fixed n=100 equals the single-field bound:", a.bound == b.bound, f"({a.bound:.3g})")

X = sample_normalized_sum("rademacher", 8, 100, 500_000, seed=4)
t = empirical_tail(X, [3.0, 4.0])
print("Rademacher sums, P(max > u) upper 99% limits:", t.ci_hi)

# For a heavier tail function the rescaled versions differ; zeta is their
# envelope and gives a bound uniform in n.
phi = power_type(1.0)
lam = np.array([0.5, 0.9])
for n in (1, 4, 16):
    print(f"phi_{n}(lam) =", np.round(phi_n(phi, n)(lam), 4))
print("zeta(lam)   =", np.round(zeta(phi, 16)(lam), 4))
