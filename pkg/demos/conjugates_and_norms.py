"""Tail functions, their conjugates, and norms estimated from data.

Run: python3 demos/conjugates_and_norms.py
"""

import numpy as np

from chainbound import phi as P

rng = np.random.default_rng(0)

# A tail function phi is even, convex, zero at the origin.  Its conjugate
# phi*(x) = sup_lam (lam x - phi(lam)) is what ends up in every tail bound.
sub = P.subgaussian()
x = np.array([0.5, 1.0, 3.0])
table = P.fenchel_transform(sub, x)
print("lam^2/2      phi*(x) =", table.values, " slopes =", table.slopes)

for r in (1.0, 1.5, 3.0):
    phi = P.power_type(r)
    print(f"power r={r:<4} phi*(x) =", np.round(phi.conjugate(x), 6))

# Conjugating twice gives phi back (up to bisection tolerance).
lam = np.linspace(0.1, 4, 5)
print("biconjugate residual:", np.max(np.abs(P.biconjugate(P.power_type(1.5), lam) - P.power_type(1.5)(lam))))

# Norms from samples.  The MGF-based norm solves log E exp(lam X) <= phi(lam tau)
# on a lambda grid; grid points where one summand dominates the empirical
# MGF are dropped.
z = rng.standard_normal(100_000)
for c in (0.5, 1.0, 3.0):
    print(f"B-norm of {c} * N(0,1): {P.bphi_norm_mgf(c * z, sub).value:.3f}")

psi = P.PsiMomentScale(sub)
print("moment norm of N(0,1):", round(P.gpsi_norm(z, psi).value, 3))

# The natural tail function of a field: log of the largest coordinate MGF,
# convexified.  With variances 1 and 4 it tracks 2 lam^2.
X = np.column_stack([z, 2 * rng.standard_normal(z.size)])
nat = P.natural_phi(X, np.linspace(0.05, 1.5, 30))
for l in (0.5, 1.0, 1.5):
    print(f"natural phi({l}) = {float(nat(l)):.3f}   2 lam^2 = {2 * l * l:.3f}")

# Normalized sums rescale the tail function; lam^2/2 is a fixed point.
quartic = P.PhiFunction("custom", np.inf, lambda a: a * a / 2 + a**4, lambda a: a + 4 * a**3, curvature=1.0)
print("phi_4(1) for lam^2/2 + lam^4:", float(P.phi_n(quartic, 4)(1.0)), "(expect 0.75)")
