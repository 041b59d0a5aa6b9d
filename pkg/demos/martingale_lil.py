"""Polynomial Rademacher martingales and the iterated-logarithm bound.

xi_d(n) is the d-th elementary symmetric polynomial of n random signs.

Run: python3 demos/martingale_lil.py   (about 20 s)
"""

import numpy as np

from chainbound.bounds import BlockPartition, martingale_block_bound, poly_martingale_model, v_r
from chainbound.sim import (
    empirical_tail, limsup_target, poly_martingale_from_signs, poly_martingale_suprema,
    rademacher_signs, simulate_limsup,
)

eps = rademacher_signs(1000, 5, seed=0)
S = np.cumsum(eps.astype(np.int64), axis=1)
xi2 = poly_martingale_from_signs(eps, 2)
print("2 xi_2(n) == S_n^2 - n on every path:", np.array_equal(2 * xi2, S * S - np.arange(1, 1001)))

for d in (1, 2):
    s = simulate_limsup(d, 2**18, 100, seed=d)
    print(f"d={d}: max over n of xi_d(n) / (n log log n)^(d/2): median {s.median:.3f}, "
          f"deciles [{s.q10:.3f}, {s.q90:.3f}], limit {limsup_target(d):.3f}")

# Union bound over dyadic blocks [2^(k-1), 2^k - 1].
model = poly_martingale_model(1)
part = BlockPartition(2, 2**16)
sup = poly_martingale_suprema(1, 2**16, 5000, seed=3, normalizer=lambda n: model.sigma(n) * v_r(n, model.r))
us = [2.5, 3.0, 6.0, 12.0]
tail = empirical_tail(sup, us)
for u, hi in zip(us, tail.ci_hi):
    b = martingale_block_bound(model, part, u)
    print(f"u={u:5.1f}  block bound {b.total:10.4g}  largest block {b.per_block.max():.3g}  empirical ci_hi {hi:.3g}")
