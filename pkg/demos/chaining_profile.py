"""Chaining sequences, the K profile, and the chain sum X(u).

Run: python3 demos/chaining_profile.py
"""

import numpy as np

from chainbound.chaining import (
    admissibility_check, build_chain, chain_L, chain_sum_X, default_gamma, delta_phi, k_inverse, k_profile,
)
from chainbound.entropy import FiniteMetricSpace
from chainbound.phi import subgaussian

space = FiniteMetricSpace.from_points(np.linspace(0.0, 1.0, 8))

# A chain for the ball around point 0: nested levels, each a greedy net at
# half the previous radius, until every point is its own projection.
chain = build_chain(space, 0, 1.0, "dyadic")
gamma = default_gamma(chain.depth, 0.75)
print("levels:", [list(l) for l in chain.levels])
print("weights:", np.round(gamma.gamma, 3), " L =", round(chain_L(space, chain, gamma), 4))

refined = build_chain(space, 0, 1.0, "refine", gamma=gamma)
print("refined levels:", [list(l) for l in refined.levels], " L =", round(chain_L(space, refined, gamma), 4))

# The profile K(delta): worst ball, best weights, best chain found.  It is an
# upper estimate, made nondecreasing, and every value has a witness.
prof = k_profile(space, np.linspace(0.1, 1.0, 10))
for d, k in zip(prof.delta_grid, prof.k_values):
    print(f"  delta={d:.2f}  K={k:.4f}")
print("K^{-1}(0.05) =", k_inverse(prof, 0.05))
print("Delta(C=1, u=4) =", delta_phi(prof, subgaussian(), 1.0, 4.0))

# X(u) = sum_n |T_n||T_{n-1}| exp(-phi*(u / gamma_n)) falls with u but, with
# gamma_1 >= 3, it always sits above exp(-phi*(u/2)).
u = np.array([0.0, 2.0, 5.0, 10.0, 20.0])
print("X(u):", [round(chain_sum_X(chain, gamma, subgaussian(), x), 5) for x in u])
rep = admissibility_check(chain, gamma, subgaussian(), u)
print("X(u) <= exp(-phi*(u/2)):", rep.ok.tolist(), " threshold:", rep.threshold)
