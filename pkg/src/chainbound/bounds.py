"""Exponential tail bounds for the maximum of a field over a finite index set.

The headline bound is

    P(max_t xi(t) > u) <= (exp(C) + 1) * N(T, d, C * Delta(u)) * exp(-phi*(u)),

valid once ``u`` passes an onset ``u0(C)`` read off the chaining profile.
The same assembly serves normalized sums (with ``phi_n`` or its envelope
``zeta``), and a block decomposition gives the law-of-iterated-logarithm
bound for polynomial Rademacher martingales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import comb

from .chaining import KProfile, as_conjugate, k_inverse
from .entropy import FiniteMetricSpace, covering_number
from .errors import DomainError, NoOnset
from .phi import PhiFunction, phi_n, subgaussian, zeta

__all__ = [
    "TailBoundReport",
    "MartingaleModel",
    "BlockPartition",
    "MartingaleBound",
    "DEFAULT_U_GRID",
    "u0_of_C",
    "theorem1_bound",
    "optimize_C",
    "best_report",
    "theorem2_bound",
    "poly_martingale_model",
    "martingale_block_bound",
    "v_r",
]

DEFAULT_U_GRID = np.arange(1, 2001) * 0.05


@dataclass(frozen=True)
class TailBoundReport:
    u: float
    C: float
    u0: float | None
    covering_count: int
    delta_used: float
    conj_value: float
    bound: float
    below_u0: bool
    k_inverse_capped: bool
    mode: str = "t1"

    @property
    def two_sided(self) -> float:
        return 2.0 * self.bound

    @property
    def log_bound(self) -> float:
        """Natural log of the bound; stays finite where ``bound`` underflows."""
        return math.log(math.exp(self.C) + 1.0) + math.log(self.covering_count) - self.conj_value

    @property
    def flags(self) -> str:
        out = [name for name, on in (("below_u0", self.below_u0),
                                     ("k_inverse_capped", self.k_inverse_capped)) if on]
        return "|".join(out)

    def recompute(self) -> float:
        return _assemble(self.C, self.covering_count, self.conj_value)

    def as_dict(self) -> dict:
        return {
            "u": self.u, "C": self.C, "u0": self.u0, "N": self.covering_count,
            "delta": self.delta_used, "phi_star": self.conj_value, "bound": self.bound,
            "log_bound": self.log_bound, "two_sided": self.two_sided, "below_u0": self.below_u0,
            "k_inverse_capped": self.k_inverse_capped, "mode": self.mode,
        }


def _assemble(C: float, N: int, conj_value: float) -> float:
    return (math.exp(C) + 1.0) * N * math.exp(-conj_value)


def _deltas(profile: KProfile, table, C: float, u: np.ndarray):
    slope = np.asarray(table.slope(u), dtype=float)
    ok = u * slope > 0
    h = np.where(ok, 0.5 * C / np.where(ok, u * slope, 1.0), np.inf)
    out = np.full(u.shape, np.nan)
    for i in np.flatnonzero(ok):
        out[i] = k_inverse(profile, h[i])[0]
    return out, ok


def u0_of_C(profile: KProfile, conj, C: float, u_grid=None) -> float:
    """Smallest grid u with ``Delta(C, u) <= K0 / 2``.

    Raises
    ------
    NoOnset
        If ``K0 = 0`` or no grid point qualifies.
    """
    K0 = profile.K0
    if K0 <= 0:
        raise NoOnset("K0 = 0: every ball is a zero-distance class, no onset exists")
    u = np.sort(np.asarray(DEFAULT_U_GRID if u_grid is None else u_grid, dtype=float))
    deltas, ok = _deltas(profile, as_conjugate(conj), C, u)
    hit = np.flatnonzero(ok & (deltas <= 0.5 * K0))
    if hit.size == 0:
        raise NoOnset(
            f"Delta(C={C:g}, u) stays above K0/2 = {0.5 * K0:.4g} up to the grid ceiling u = {u[-1]:g}"
        )
    return float(u[hit[0]])


def theorem1_bound(space: FiniteMetricSpace, profile: KProfile, conj, C: float, u: float,
                   u0: float | None | str = "auto", u_grid=None, mode: str = "t1") -> TailBoundReport:
    """One-sided bound on ``P(max_t xi(t) > u)`` for one ``(C, u)``.

    Values below the onset are still reported, with ``below_u0`` set.
    ``u0="auto"`` computes the onset on ``u_grid``; ``None`` means no onset.
    """
    if not u > 0:
        raise DomainError("u must be positive")
    if not C > 0:
        raise DomainError("C must be positive")
    table = as_conjugate(conj)
    slope = float(table.slope(u))
    if not u * slope > 0:
        raise DomainError(f"u = {u:g} is below the slope onset of phi*")
    delta, capped = k_inverse(profile, 0.5 * C / (u * slope))
    N, _ = covering_number(space, None, C * delta, "greedy")
    conj_value = float(table.value(u))
    if isinstance(u0, str):
        try:
            u0 = u0_of_C(profile, table, C, u_grid)
        except NoOnset:
            u0 = None
    below = u0 is None or u < u0
    return TailBoundReport(
        u=float(u), C=float(C), u0=u0, covering_count=int(N), delta_used=delta,
        conj_value=conj_value, bound=_assemble(C, N, conj_value), below_u0=below,
        k_inverse_capped=capped, mode=mode,
    )


def optimize_C(space: FiniteMetricSpace, profile: KProfile, conj, u: float, C_grid,
               u_grid=None, mode: str = "t1") -> TailBoundReport:
    """Smallest bound over ``C_grid``, among entries inside the validity
    range when any exist.  Ties go to the earlier grid entry."""
    C_grid = list(C_grid)
    if not C_grid:
        raise DomainError("C_grid must be nonempty")
    table = as_conjugate(conj)
    reports = [theorem1_bound(space, profile, table, C, u, u_grid=u_grid, mode=mode) for C in C_grid]
    return best_report(reports)


def best_report(reports) -> TailBoundReport:
    """Smallest bound among unflagged reports, or among all if every one is flagged."""
    pool = [r for r in reports if not r.below_u0] or list(reports)
    return min(pool, key=lambda r: r.bound)


def theorem2_bound(space_n: FiniteMetricSpace, profile_n: KProfile, phi: PhiFunction, C: float,
                   u: float, mode: tuple = ("fixed", 1), u_grid=None) -> TailBoundReport:
    """Bound for the normalized sum ``n**-0.5 * sum_i xi_i``.

    ``mode`` is ``("fixed", n)`` to use ``phi_n`` or ``("uniform", n_max)``
    to use the envelope ``zeta``; the space and profile must come from the
    matching distance.
    """
    kind, n = mode
    if kind == "fixed":
        psi = phi_n(phi, n)
    elif kind == "uniform":
        psi = zeta(phi, n)
    else:
        raise DomainError(f"unknown theorem-2 mode {kind!r}")
    return theorem1_bound(space_n, profile_n, psi, C, u, u_grid=u_grid, mode=f"t2-{kind}:{n}")


# Martingale law-of-iterated-logarithm bound


def v_r(n, r: float):
    """Iterated-logarithm normalizer ``(log log(n + 3))**(1/r)``."""
    return np.log(np.log(np.asarray(n, dtype=float) + 3.0)) ** (1.0 / r)


@dataclass(frozen=True)
class MartingaleModel:
    r: float
    beta: float
    sigma: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    phi: PhiFunction = field(repr=False)
    slowly_varying: Callable[[float], float] = field(default=lambda x: 1.0, repr=False)
    label: str = "custom"

    def check_envelope(self, n_max: int, L1=lambda n: 0.5, L2=lambda n: 1.0, n_min: int = 1) -> bool:
        """``n**beta * L1(n) <= sigma(n) <= n**beta * L2(n)`` and sigma
        nondecreasing, for ``n_min <= n <= n_max``."""
        n = np.arange(n_min, n_max + 1, dtype=float)
        s = np.asarray(self.sigma(n), dtype=float)
        nb = n**self.beta
        return bool(np.all(np.diff(s) >= 0) and np.all(nb * L1(n) <= s) and np.all(s <= nb * L2(n)))


def _chaos_phi() -> PhiFunction:
    """Log-MGF of ``(Z**2 - 1) / sqrt(2)`` on its positive side, made even."""
    k = math.sqrt(2.0)
    return PhiFunction(
        kind="chaos2",
        lambda0=1.0 / k,
        func=lambda a: -a / k - 0.5 * np.log1p(-k * a),
        deriv=lambda a: a / (1.0 - k * a),
        curvature=1.0,
    )


def poly_martingale_model(d: int) -> MartingaleModel:
    """Model for ``xi_d(n)``: sigma(n) = sqrt(binom(n, d)), r = 2/d, beta = d/2.

    The tail function is exact for d = 1 (Rademacher sums are subgaussian)
    and the Gaussian-chaos limit for d = 2.
    """
    if d == 1:
        phi = subgaussian(1.0)
    elif d == 2:
        phi = _chaos_phi()
    else:
        raise DomainError("tail functions are provided for d in {1, 2}")
    sigma = lambda n: np.sqrt(comb(np.asarray(n, dtype=float), d))
    return MartingaleModel(r=2.0 / d, beta=d / 2.0, sigma=sigma, phi=phi, label=f"polymart:{d}")


@dataclass(frozen=True)
class BlockPartition:
    """Blocks ``[Q**(k-1), Q**k - 1]`` covering ``[start, n_max]`` (last one clipped)."""

    Q: int
    n_max: int
    start: int = 1

    def __post_init__(self):
        if self.Q < 2:
            raise DomainError("Q must be an integer >= 2")
        if self.n_max < self.start or self.start < 1:
            raise DomainError("need 1 <= start <= n_max")

    @property
    def blocks(self) -> list[tuple[int, int]]:
        out = []
        a = 1
        while a <= self.n_max:
            b = min(a * self.Q - 1, self.n_max)
            if b >= self.start:
                out.append((max(a, self.start), b))
            a *= self.Q
        return out


@dataclass(frozen=True)
class MartingaleBound:
    u: float
    blocks: tuple
    arguments: np.ndarray
    per_block: np.ndarray
    total: float
    shape_slope: float


def martingale_block_bound(model: MartingaleModel, partition: BlockPartition, u: float,
                           C_doob: float = 0.5) -> MartingaleBound:
    """Union bound over blocks for ``P(sup_n xi(n) / (sigma(n) v_r(n)) > u)``.

    Block k contributes ``exp(-phi*(C_doob u sigma(A) v_r(A) / sigma(B)))``.
    ``shape_slope`` is ``-log(total) / (u**r L(u)**(1/r))``.
    """
    if not u > 2:
        raise DomainError("the martingale bound is stated for u > 2")
    blocks = partition.blocks
    A = np.array([a for a, _ in blocks], dtype=float)
    B = np.array([b for _, b in blocks], dtype=float)
    sA = np.asarray(model.sigma(A), dtype=float)
    sB = np.asarray(model.sigma(B), dtype=float)
    if np.any(sB == 0):
        k = int(np.flatnonzero(sB == 0)[0])
        raise DomainError(f"sigma vanishes at the end of block {blocks[k]}")
    arg = C_doob * u * sA * v_r(A, model.r) / sB
    table = as_conjugate(model.phi)
    per = np.exp(-np.asarray(table.value(arg), dtype=float))
    total = float(per.sum())
    scale = u**model.r * model.slowly_varying(u) ** (1.0 / model.r)
    return MartingaleBound(float(u), tuple(blocks), arg, per, total, -math.log(total) / scale)
