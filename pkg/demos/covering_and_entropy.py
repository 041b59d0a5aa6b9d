"""Distances, covering numbers and the entropy integral on finite spaces.

Run: python3 demos/covering_and_entropy.py
"""

import math

import numpy as np

from chainbound.entropy import (
    FiniteMetricSpace, covering_number, entropy, entropy_integral, gaussian_distance, natural_distance,
)
from chainbound.phi import subgaussian
from chainbound.presets import se_grid_cov, two_point

# Four points on a line, radius-1 closed balls: two balls are enough.
line = FiniteMetricSpace.from_points([0.0, 1.0, 2.0, 3.0])
count, net = covering_number(line, epsilon=1.0, mode="exact")
print("line: exact count", count, "centers", net.centers, "entropy", round(entropy(line, epsilon=1.0), 4))

# Greedy against exact on a random cloud.
rng = np.random.default_rng(1)
cloud = FiniteMetricSpace.from_points(rng.random((15, 2)))
for eps in (0.1, 0.2, 0.4):
    e, _ = covering_number(cloud, epsilon=eps, mode="exact")
    g, _ = covering_number(cloud, epsilon=eps, mode="greedy")
    print(f"eps={eps}: exact {e}, greedy {g}")

# For a Gaussian field the natural distance is the L2 distance of increments.
cov = se_grid_cov(8, 0.25)
exact = gaussian_distance(cov)
X = rng.multivariate_normal(np.zeros(8), cov, size=100_000)
est = natural_distance(X, subgaussian())
print("natural distance vs closed form, worst relative error:",
      round(float(np.max(np.abs(est.dist - exact.dist) / np.where(exact.dist > 0, exact.dist, 1))), 4))

# The entropy integral of eps -> (phi*)^{-1}(H(eps)) over (0, 1].  On two
# points at distance 1 the entropy is log 2 on the whole interval.
res = entropy_integral(two_point(1.0), subgaussian())
print("two-point integral:", res.value, "sqrt(2 log 2) =", math.sqrt(2 * math.log(2)))
print("64-point grid integral:", round(entropy_integral(exact, subgaussian()).value, 4))
