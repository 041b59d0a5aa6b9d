"""Chaining tail bounds for the maximum of a random field on a finite index set."""

__version__ = "0.1.0"

from .errors import (
    ChainboundError, DomainError, NonConvergence, NoOnset, NotSPD, SizeLimit,
    TriangleViolation, Unbounded,
)
from .phi import (
    ConjugateTable, NormEstimate, PhiFunction, PsiMomentScale, biconjugate, bphi_norm_mgf,
    conjugate, conjugate_inverse, fenchel_transform, gpsi_norm, natural_phi, phi_inverse,
    phi_n, power_type, subgaussian, tabulated, zeta,
)
from .entropy import (
    EpsilonNet, FiniteMetricSpace, covering_number, entropy, entropy_integral,
    gaussian_distance, natural_distance,
)
from .chaining import (
    ChainingSequence, GammaWeights, KProfile, admissibility_check, build_chain, chain_L,
    chain_sum_X, default_gamma, delta_phi, k_inverse, k_profile,
)
from .bounds import (
    BlockPartition, MartingaleModel, TailBoundReport, martingale_block_bound, optimize_C,
    poly_martingale_model, theorem1_bound, theorem2_bound, u0_of_C,
)
from .sim import (
    EmpiricalTail, empirical_tail, example_A_suprema, limsup_statistic, sample_example_A,
    sample_gaussian, sample_normalized_sum, sample_poly_martingale, simulate_limsup,
)
