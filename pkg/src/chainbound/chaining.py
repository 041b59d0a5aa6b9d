"""Generic chaining on finite semi-metric spaces.

A chain for the ball ``S(t0, delta)`` is a nested family of index sets
``T0 = {t0} <= T1 <= ... <= TM`` whose last level holds one representative
of every zero-distance class of the ball.  With weights ``gamma`` summing
(in reciprocal) to one, the chain functional is

    L = max_t sum_m d(pi_m(t), pi_{m-1}(t)) / gamma_m,

and K(delta) is its best value over chains and weights, worst case over
centres.  Everything here is an upper approximation of K built from explicit
witnesses, so bounds fed with it stay conservative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import FiniteMetricSpace
from .errors import DomainError
from .phi import ConjugateTable, PhiFunction, fenchel_transform

__all__ = [
    "GammaWeights",
    "ChainingSequence",
    "KProfile",
    "AdmissibilityReport",
    "default_gamma",
    "build_chain",
    "chain_L",
    "chain_terms",
    "k_profile",
    "k_inverse",
    "delta_phi",
    "chain_sum_X",
    "admissibility_check",
    "as_conjugate",
    "DEFAULT_RHOS",
    "STRATEGIES",
]

DEFAULT_RHOS = (0.70, 0.75, 0.80, 0.85, 0.90)
STRATEGIES = ("dyadic", "refine")
# a depth-one chain, used for balls too large for the net strategies
_STAR = "star"


@dataclass(frozen=True)
class GammaWeights:
    """Geometric weights ``gamma_n = 1 / (rho**(n-1) * (1 - rho))``, n = 1..M."""

    rho: float
    M: int
    gamma: np.ndarray = field(repr=False)

    @property
    def tail(self) -> float:
        """Mass ``sum_{n > M} 1/gamma_n`` left out by the truncation."""
        return self.rho**self.M

    def scaled(self, c: float) -> "GammaWeights":
        return GammaWeights(self.rho, self.M, self.gamma * c)


def default_gamma(M: int, rho: float = 0.75) -> GammaWeights:
    if not 2.0 / 3.0 < rho < 1.0:
        raise DomainError("rho must lie in (2/3, 1)")
    if M < 1:
        raise DomainError("M must be >= 1")
    n = np.arange(1, M + 1)
    gamma = 1.0 / (rho ** (n - 1) * (1.0 - rho))
    assert gamma[0] >= 3.0
    gamma.setflags(write=False)
    return GammaWeights(float(rho), int(M), gamma)


@dataclass(frozen=True, eq=False)
class ChainingSequence:
    """Nested levels of space indices; ``levels[0] == (ball_center,)``."""

    ball_center: int
    delta: float
    ball: tuple
    levels: tuple
    strategy: str = "custom"

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def projections(self, space: FiniteMetricSpace) -> np.ndarray:
        """``P[m, k]`` is the index of ``pi_m(ball[k])``; ties go to the lowest index."""
        ball = np.asarray(self.ball)
        P = np.empty((len(self.levels), ball.size), dtype=int)
        for m, lev in enumerate(self.levels):
            lev = np.asarray(lev)
            P[m] = lev[np.argmin(space.dist[np.ix_(ball, lev)], axis=1)]
        return P

    def to_json(self, space: FiniteMetricSpace, gamma: GammaWeights | None = None) -> str:
        lab = space.labels
        obj = {
            "ball_center": lab[self.ball_center],
            "delta": self.delta,
            "levels": [[lab[i] for i in lev] for lev in self.levels],
        }
        if gamma is not None:
            obj["gamma"] = {"rho": gamma.rho, "M": gamma.M}
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str, space: FiniteMetricSpace) -> "ChainingSequence":
        obj = json.loads(text)
        idx = lambda labels: tuple(int(i) for i in space.index(labels))
        t0 = int(space.index([obj["ball_center"]])[0])
        ball = tuple(int(i) for i in np.flatnonzero(space.dist[t0] <= obj["delta"]))
        return cls(t0, float(obj["delta"]), ball, tuple(idx(l) for l in obj["levels"]))


def _ball(space: FiniteMetricSpace, t0: int, delta: float) -> np.ndarray:
    return np.flatnonzero(space.dist[t0] <= delta)


def _representatives(space: FiniteMetricSpace, t0: int, ball: np.ndarray) -> list[int]:
    """Lowest index of each zero-distance class in the ball; t0 stands for its own."""
    zero = space.dist[np.ix_(ball, ball)] == 0
    later = np.tril(zero, -1).any(axis=1)
    with_t0 = space.dist[t0, ball] == 0
    reps = ball[~later & ~with_t0].tolist()
    return sorted(reps + [t0])


def _levels_from_first(t0: int, first: dict, M: int) -> tuple:
    return tuple(
        tuple(sorted([t0] + [p for p, a in first.items() if a <= m])) for m in range(M + 1)
    )


def _dyadic_first(space, t0, delta, reps, max_depth):
    """First-appearance level of each representative under dyadic greedy nets."""
    others = [r for r in reps if r != t0]
    if not others:
        return {}, 0
    pos = [d for d in space.dist[np.ix_(reps, reps)].ravel() if d > 0]
    dmin = min(pos)
    R = np.asarray(reps)
    first: dict = {}
    current = [t0]
    m = 0
    while len(current) < len(reps):
        m += 1
        eps = delta * 2.0**-m
        if eps < dmin or (max_depth is not None and m >= max_depth):
            for r in others:
                first.setdefault(r, m)
            break
        cover = space.dist[np.ix_(R, R)] <= eps
        uncovered = ~cover[:, np.searchsorted(R, current)].any(axis=1)
        while uncovered.any():
            counts = (cover & uncovered[None, :]).sum(axis=1)
            c = int(np.argmax(counts))
            first[int(R[c])] = m
            current.append(int(R[c]))
            uncovered &= ~cover[c]
    return first, m


def _L_of(space, t0, ball, levels, gamma) -> float:
    chain = ChainingSequence(t0, 0.0, tuple(ball), levels)
    return chain_L(space, chain, gamma)


def _refine(space, t0, ball, reps, first, M, gamma, max_passes=6):
    """Coordinate descent on first-appearance levels, strict improvements only."""
    first = dict(first)
    best = _L_of(space, t0, ball, _levels_from_first(t0, first, M), gamma)
    for _ in range(max_passes):
        improved = False
        for p in sorted(first):
            keep = first[p]
            for a in range(1, M + 1):
                if a == keep:
                    continue
                first[p] = a
                val = _L_of(space, t0, ball, _levels_from_first(t0, first, M), gamma)
                if val < best:
                    best, keep, improved = val, a, True
            first[p] = keep
        if not improved:
            break
    return first


def build_chain(space: FiniteMetricSpace, t0, delta: float, strategy: str = "dyadic",
                gamma: GammaWeights | None = None, max_depth: int | None = None,
                by_label: bool = False) -> ChainingSequence:
    """Chain for the closed ball ``S(t0, delta)``.

    ``dyadic`` extends greedy ``delta * 2**-m`` nets level by level and stops
    once the nets are finer than the smallest positive distance (or at
    ``max_depth``, where the last level takes every remaining point).
    ``refine`` starts from the dyadic chain and moves single points between
    levels while L strictly decreases; it needs ``gamma``.  ``star`` is the
    one-level chain ``T1 = ball``.
    """
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    if by_label:
        t0 = int(space.index([t0])[0])
    t0 = int(t0)
    ball = _ball(space, t0, delta)
    reps = _representatives(space, t0, ball)
    if strategy == _STAR:
        if len(reps) == 1:
            return ChainingSequence(t0, delta, tuple(ball.tolist()), ((t0,),), _STAR)
        return ChainingSequence(t0, delta, tuple(ball.tolist()), ((t0,), tuple(reps)), _STAR)
    first, M = _dyadic_first(space, t0, delta, reps, max_depth)
    if strategy == "refine":
        if gamma is None:
            raise DomainError("the refine strategy needs gamma weights")
        if max_depth is not None and M > 0:
            M = max_depth
        first = _refine(space, t0, ball, reps, first, M, gamma)
    elif strategy != "dyadic":
        raise DomainError(f"unknown strategy {strategy!r}")
    return ChainingSequence(t0, delta, tuple(ball.tolist()), _levels_from_first(t0, first, M), strategy)


def chain_terms(space: FiniteMetricSpace, chain: ChainingSequence, gamma: GammaWeights) -> np.ndarray:
    """Per-point, per-level increments ``d(pi_m(t), pi_{m-1}(t)) / gamma_m``."""
    M = chain.depth
    if M == 0:
        return np.zeros((0, len(chain.ball)))
    if gamma.M < M:
        raise DomainError(f"gamma has {gamma.M} weights but the chain has depth {M}")
    P = chain.projections(space)
    steps = space.dist[P[1:], P[:-1]]
    return steps / gamma.gamma[:M, None]


def chain_L(space: FiniteMetricSpace, chain: ChainingSequence, gamma: GammaWeights) -> float:
    terms = chain_terms(space, chain, gamma)
    if terms.size == 0:
        return 0.0
    return float(terms.sum(axis=0).max())


@dataclass(frozen=True, eq=False)
class KProfile:
    """Monotone upper approximation of K on a delta grid, with witnesses."""

    delta_grid: np.ndarray
    k_values: np.ndarray
    raw_values: np.ndarray
    witnesses: tuple = field(repr=False)

    @property
    def K0(self) -> float:
        return float(self.k_values.max()) if self.k_values.size else 0.0

    def inflated(self, factor: float) -> "KProfile":
        return KProfile(self.delta_grid, self.k_values * factor, self.raw_values * factor, ())


@dataclass(frozen=True)
class Witness:
    chain: ChainingSequence
    gamma: GammaWeights


def default_delta_grid(space: FiniteMetricSpace, n: int = 40) -> np.ndarray:
    pos = space.dist[space.dist > 0]
    if pos.size == 0:
        return np.array([1.0])
    lo = min(float(pos.min()), 1.0)
    grid = np.geomspace(lo, 1.0, n) if lo < 1 else np.array([1.0])
    grid[0] = lo
    return np.unique(grid)


def k_profile(space: FiniteMetricSpace, delta_grid=None, strategies=STRATEGIES,
              gamma_candidates=DEFAULT_RHOS, max_depth: int | None = None,
              refine_max_ball: int = 12, net_max_ball: int = 256) -> KProfile:
    """Upper approximation of ``K(delta) = inf_gamma max_t0 inf_chain L``.

    For each delta, every centre and weight choice is tried with each
    strategy; the smallest L per centre is kept, the worst centre taken,
    and the best weight chosen.  Balls above ``refine_max_ball`` points skip
    the refine strategy and balls above ``net_max_ball`` use only the
    one-level chain.  A running max over increasing delta makes the result
    nondecreasing; each value's witness reproduces it through chain_L.
    """
    grid = default_delta_grid(space) if delta_grid is None else np.sort(np.asarray(delta_grid, dtype=float))
    if grid.size == 0:
        raise DomainError("delta_grid must be nonempty")
    n = len(space)
    rhos = tuple(gamma_candidates)
    use_dyadic = "dyadic" in strategies
    use_refine = "refine" in strategies
    raw = np.zeros(grid.size)
    wit: list = []
    for g, delta in enumerate(grid):
        sizes = (space.dist <= delta).sum(axis=1)
        # per centre: the dyadic chain for small balls, else the radius of the
        # ball (the one-level chain's L times gamma_1)
        dyadic = {}
        radius = {}
        for t0 in range(n):
            if sizes[t0] > net_max_ball or not (use_dyadic or use_refine):
                radius[t0] = float(space.dist[t0][space.dist[t0] <= delta].max())
            else:
                dyadic[t0] = build_chain(space, t0, delta, "dyadic", max_depth=max_depth)
        depth = max([1, max_depth or 1] + [c.depth for c in dyadic.values()])
        best = (math.inf, None)
        for rho in rhos:
            gamma = default_gamma(depth, rho)
            worst = (-math.inf, None)
            for t0 in range(n):
                if t0 in radius:
                    val, make = radius[t0] / gamma.gamma[0], (_STAR, t0)
                else:
                    cands = [dyadic[t0]] if use_dyadic else []
                    if use_refine and sizes[t0] <= refine_max_ball and dyadic[t0].depth > 0:
                        cands.append(build_chain(space, t0, delta, "refine", gamma=gamma,
                                                 max_depth=max_depth))
                    cands = cands or [dyadic[t0]]
                    vals = [chain_L(space, c, gamma) for c in cands]
                    j = int(np.argmin(vals))
                    val, make = vals[j], cands[j]
                if val > worst[0]:
                    worst = (val, (make, gamma))
            if worst[0] < best[0]:
                best = worst
        make, gamma = best[1]
        if isinstance(make, tuple):
            make = build_chain(space, make[1], delta, _STAR)
        raw[g] = chain_L(space, make, gamma)
        wit.append(Witness(make, gamma))
    k = np.maximum.accumulate(raw)
    witnesses = []
    for g in range(grid.size):
        j = int(np.flatnonzero(raw[: g + 1] == k[g])[-1])
        witnesses.append(wit[j])
    return KProfile(grid, k, raw, tuple(witnesses))


def k_inverse(profile: KProfile, h: float) -> tuple[float, bool]:
    """Smallest grid delta with ``K(delta) >= h``; ``(1.0, True)`` when none."""
    if not h > 0:
        raise DomainError("h must be positive")
    hit = np.flatnonzero(profile.k_values >= h)
    if hit.size == 0:
        return 1.0, True
    return float(profile.delta_grid[hit[0]]), False


def as_conjugate(conj) -> ConjugateTable:
    if isinstance(conj, ConjugateTable):
        return conj
    if isinstance(conj, PhiFunction):
        return fenchel_transform(conj, np.array([0.0]))
    raise DomainError("expected a ConjugateTable or PhiFunction")


def delta_phi(profile: KProfile, conj, C: float, u: float, with_flag: bool = False):
    """``K^{-1}(C / (2 u (phi*)'(u)))``; the radius at which the bound localizes."""
    table = as_conjugate(conj)
    slope = float(table.slope(u)) if u >= 0 else 0.0
    if not u * slope > 0:
        raise DomainError(f"u = {u:g} is below the slope onset of phi*")
    delta, capped = k_inverse(profile, 0.5 * C / (u * slope))
    return (delta, capped) if with_flag else delta


def chain_sum_X(chain: ChainingSequence, gamma: GammaWeights, conj, u: float) -> float:
    """``sum_n |T_n| |T_{n-1}| exp(-phi*(u / gamma_n))``."""
    if u < 0:
        raise DomainError("u must be nonnegative")
    M = chain.depth
    if M == 0:
        return 0.0
    if gamma.M < M:
        raise DomainError(f"gamma has {gamma.M} weights but the chain has depth {M}")
    table = as_conjugate(conj)
    sizes = np.array([len(l) for l in chain.levels], dtype=float)
    e = np.exp(-np.asarray(table.value(u / gamma.gamma[:M])))
    return float(np.sum(sizes[1:] * sizes[:-1] * e))


@dataclass(frozen=True)
class AdmissibilityReport:
    u: np.ndarray
    X: np.ndarray
    rhs: np.ndarray
    ok: np.ndarray
    threshold: float | None


def admissibility_check(chain: ChainingSequence, gamma: GammaWeights, conj, u_grid) -> AdmissibilityReport:
    """Per-u test ``X(u) <= exp(-phi*(u/2))`` and the smallest grid u from
    which it holds at every larger grid point (None if the last point fails)."""
    u = np.sort(np.asarray(u_grid, dtype=float))
    if u.size == 0:
        raise DomainError("u_grid must be nonempty")
    table = as_conjugate(conj)
    X = np.array([chain_sum_X(chain, gamma, table, x) for x in u])
    rhs = np.exp(-np.asarray(table.value(u / 2.0)))
    ok = X <= rhs
    threshold = None
    if ok[-1]:
        fails = np.flatnonzero(~ok)
        threshold = float(u[fails[-1] + 1]) if fails.size else float(u[0])
    return AdmissibilityReport(u, X, rhs, ok, threshold)
