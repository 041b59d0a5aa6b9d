"""Samplers for the example fields and a Monte-Carlo tail estimator.

Replicates are generated in fixed-size blocks, each with its own child of a
``SeedSequence``; the output therefore depends only on the seed, never on
how many threads ran the blocks.  ``CHAINBOUND_THREADS`` caps the pool.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta

from .errors import DomainError, NotSPD

__all__ = [
    "EmpiricalTail",
    "LimsupSummary",
    "thread_count",
    "sample_gaussian",
    "sample_example_A",
    "example_A_scale",
    "example_A_suprema",
    "rademacher_signs",
    "poly_martingale_from_signs",
    "sample_poly_martingale",
    "poly_martingale_suprema",
    "sample_normalized_sum",
    "limsup_statistic",
    "simulate_limsup",
    "limsup_target",
    "empirical_tail",
    "clopper_pearson",
    "write_suprema",
    "read_suprema",
]


def thread_count() -> int:
    env = os.environ.get("CHAINBOUND_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, n)


def _blocked(replicates: int, block: int, seed: int, fn) -> list:
    """Run ``fn(rng, size)`` over consecutive replicate blocks, results in order."""
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    sizes = [block] * (replicates // block)
    if replicates % block:
        sizes.append(replicates % block)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(c), s) for c, s in zip(children, sizes)]
    workers = min(thread_count(), len(jobs))
    if workers == 1:
        return [fn(r, s) for r, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def sample_gaussian(cov, replicates: int, seed: int, block: int = 65536) -> np.ndarray:
    """``replicates x m`` centered Gaussian paths with covariance ``cov``."""
    D = np.asarray(cov, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise NotSPD("covariance must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise NotSPD("covariance must be symmetric")
    w, V = np.linalg.eigh(0.5 * (D + D.T))
    if w.size and w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise NotSPD(f"covariance has eigenvalue {w.min():.3g}")
    factor = V * np.sqrt(np.clip(w, 0.0, None))
    m = D.shape[0]
    parts = _blocked(replicates, block, seed, lambda rng, s: rng.standard_normal((s, m)) @ factor.T)
    return np.concatenate(parts)


def example_A_scale(n_max: int) -> np.ndarray:
    """``sqrt(log(n + e - 1))`` for n = 1..n_max."""
    n = np.arange(1, n_max + 1, dtype=float)
    return np.sqrt(np.log(n + math.e - 1.0))


def _rayleigh_signed(rng, shape) -> np.ndarray:
    """Symmetric variable with ``P(|e| > x) = exp(-x**2 / 2)``."""
    u = 1.0 - rng.random(shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * np.sqrt(-2.0 * np.log(u))


def sample_example_A(n_max: int, replicates: int, seed: int, block: int = 16384) -> np.ndarray:
    """Paths ``xi(n) = e(n) / sqrt(log(n + e - 1))`` with independent e(n)."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    c = example_A_scale(n_max)
    return np.concatenate(_blocked(replicates, block, seed,
                                   lambda rng, s: _rayleigh_signed(rng, (s, n_max)) / c))


def example_A_suprema(n_max: int, replicates: int, seed: int, floor: float,
                      two_sided: bool = False, block: int = 1_000_000) -> np.ndarray:
    """Exact draws of ``max_n xi(n)`` (or ``max_n |xi(n)|``) censored below ``floor``.

    Coordinates are independent, so for each n the replicates whose value
    exceeds the floor are a Binomial thinning; given that, the excess is
    exact: ``e**2 / 2 - (floor c_n)**2 / 2`` is standard exponential.
    Replicates whose maximum stays at or below the floor get ``-inf``.
    The law of the result above the floor is that of the full-path maximum.
    """
    if floor <= 0:
        raise DomainError("floor must be positive")
    c = example_A_scale(n_max)
    a = floor * c
    p = np.exp(-0.5 * a * a) * (1.0 if two_sided else 0.5)

    def run(rng, size):
        sup = np.full(size, -np.inf)
        for n in range(n_max):
            k = rng.binomial(size, p[n])
            if k == 0:
                continue
            who = rng.choice(size, k, replace=False)
            val = np.sqrt(a[n] ** 2 + 2.0 * rng.standard_exponential(k)) / c[n]
            np.maximum.at(sup, who, val)
        return sup

    return np.concatenate(_blocked(replicates, block, seed, run))


def rademacher_signs(n_max: int, replicates: int, seed: int, block: int = 4096) -> np.ndarray:
    """``replicates x n_max`` matrix of independent fair signs (int8)."""
    def run(rng, s):
        bits = np.unpackbits(rng.integers(0, 256, size=(s, (n_max + 7) // 8), dtype=np.uint8), axis=1)
        return (2 * bits[:, :n_max].astype(np.int8) - 1).astype(np.int8)
    return np.concatenate(_blocked(replicates, block, seed, run))


def poly_martingale_from_signs(eps: np.ndarray, d: int) -> np.ndarray:
    """Elementary symmetric polynomial ``e_d`` of the first n signs, for every n.

    Uses ``e_k(n) = e_k(n-1) + eps(n) e_{k-1}(n-1)`` as a cumulative sum.
    """
    if d < 1:
        raise DomainError("d must be >= 1")
    eps = np.asarray(eps).astype(np.int64)
    e = np.ones_like(eps)
    for k in range(1, d + 1):
        prev = np.empty_like(e)
        prev[:, 0] = 1 if k == 1 else 0
        prev[:, 1:] = e[:, :-1]
        e = np.cumsum(eps * prev, axis=1)
    return e


def sample_poly_martingale(d: int, n_max: int, replicates: int, seed: int) -> np.ndarray:
    """Trajectories ``n -> xi_d(n)``, n = 1..n_max, one row per replicate."""
    return poly_martingale_from_signs(rademacher_signs(n_max, replicates, seed), d)


def poly_martingale_suprema(d: int, n_max: int, replicates: int, seed: int, normalizer,
                            n_min: int = 1, block: int = 64) -> np.ndarray:
    """Per-replicate ``max_{n_min <= n <= n_max} xi_d(n) / normalizer(n)``.

    Trajectories are generated and reduced block by block, so memory stays
    at ``block x n_max``.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    norm = np.asarray(normalizer(n), dtype=float)
    lo = n_min - 1

    def run(rng, s):
        bits = np.unpackbits(rng.integers(0, 256, size=(s, (n_max + 7) // 8), dtype=np.uint8), axis=1)
        eps = 2 * bits[:, :n_max].astype(np.int8) - 1
        xi = poly_martingale_from_signs(eps, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = xi[:, lo:] / norm[lo:]
        z[:, norm[lo:] == 0] = -np.inf
        return z.max(axis=1)

    return np.concatenate(_blocked(replicates, block, seed, run))


def sample_normalized_sum(base: str, m: int, n: int, replicates: int, seed: int,
                          block: int = 65536) -> np.ndarray:
    """``n**-0.5 * sum_{i<=n} xi_i(t)`` for i.i.d. copies of a base field on m points.

    ``base`` is ``"rademacher"`` (independent signs per coordinate) or
    ``"exampleA"``.
    """
    if n < 1 or m < 1:
        raise DomainError("n and m must be >= 1")
    if base == "rademacher":
        def run(rng, s):
            return (2.0 * rng.binomial(n, 0.5, size=(s, m)) - n) / math.sqrt(n)
    elif base == "exampleA":
        c = example_A_scale(m)

        def run(rng, s):
            acc = np.zeros((s, m))
            for _ in range(n):
                acc += _rayleigh_signed(rng, (s, m))
            return acc / c / math.sqrt(n)
    else:
        raise DomainError(f"unknown base field {base!r}")
    return np.concatenate(_blocked(replicates, block, seed, run))


def limsup_target(d: int) -> float:
    return 2.0 ** (d / 2.0) / math.factorial(d)


def _lil_norm(d):
    return lambda n: (n * np.log(np.log(n + 3.0))) ** (d / 2.0)


@dataclass(frozen=True)
class LimsupSummary:
    per_replicate: np.ndarray
    median: float
    q10: float
    q90: float
    target: float
    n_min: int
    n_max: int


def _summary(stat, d, n_min, n_max) -> LimsupSummary:
    q10, med, q90 = np.quantile(stat, [0.1, 0.5, 0.9])
    return LimsupSummary(stat, float(med), float(q10), float(q90), limsup_target(d), n_min, n_max)


def limsup_statistic(trajectories, d: int, n_min: int | None = None) -> LimsupSummary:
    """``max_{n_min <= n <= n_max} xi_d(n) / (n log log(n+3))**(d/2)`` per row.

    The finite-horizon stand-in for the limsup skips a burn-in; the default
    ``n_min = ceil(sqrt(n_max))`` drops the early steps where the
    iterated logarithm is still far from its regime.
    """
    X = np.asarray(trajectories)
    n_max = X.shape[1]
    n_min = math.ceil(math.sqrt(n_max)) if n_min is None else n_min
    n = np.arange(n_min, n_max + 1, dtype=float)
    stat = (X[:, n_min - 1:] / _lil_norm(d)(n)).max(axis=1)
    return _summary(stat, d, n_min, n_max)


def simulate_limsup(d: int, n_max: int, replicates: int, seed: int,
                    n_min: int | None = None) -> LimsupSummary:
    """Streaming version of :func:`limsup_statistic` for long horizons."""
    n_min = math.ceil(math.sqrt(n_max)) if n_min is None else n_min
    stat = poly_martingale_suprema(d, n_max, replicates, seed, _lil_norm(d), n_min=n_min, block=8)
    return _summary(stat, d, n_min, n_max)


def clopper_pearson(k, n: int, level: float = 0.99):
    k = np.asarray(k)
    a = 1.0 - level
    lo = np.where(k > 0, beta.ppf(a / 2, np.maximum(k, 1), n - k + 1), 0.0)
    hi = np.where(k < n, beta.ppf(1 - a / 2, k + 1, np.maximum(n - k, 1)), 1.0)
    return lo, hi


@dataclass(frozen=True)
class EmpiricalTail:
    u: np.ndarray
    counts: np.ndarray
    replicates: int
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    level: float = 0.99

    def rows(self):
        for i in range(self.u.size):
            yield (float(self.u[i]), int(self.counts[i]), float(self.p_hat[i]),
                   float(self.ci_lo[i]), float(self.ci_hi[i]))


def empirical_tail(data, u_grid, normalization=None, two_sided: bool = False,
                   level: float = 0.99) -> EmpiricalTail:
    """Exceedance counts of the supremum with Clopper-Pearson intervals.

    ``data`` is either a ``replicates x index`` matrix (the supremum over
    the index is taken here, after dividing by ``normalization``) or a
    vector of per-replicate suprema.
    """
    u = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(u) < 0):
        raise DomainError("u_grid must be increasing")
    X = np.asarray(data, dtype=float)
    if X.ndim == 2:
        if normalization is not None:
            X = X / np.asarray(normalization, dtype=float)
        sup = np.abs(X).max(axis=1) if two_sided else X.max(axis=1)
    else:
        sup = np.abs(X) if two_sided else X
    R = sup.size
    if R == 0:
        raise DomainError("no replicates")
    s = np.sort(sup)
    counts = R - np.searchsorted(s, u, side="right")
    lo, hi = clopper_pearson(counts, R, level)
    return EmpiricalTail(u, counts, R, counts / R, lo, hi, level)


def write_suprema(path: str, sup) -> None:
    """Little-endian uint64 count followed by float64 values."""
    arr = np.asarray(sup, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", arr.size))
        fh.write(arr.tobytes())


def read_suprema(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        arr = np.frombuffer(fh.read(8 * n), dtype="<f8")
    if arr.size != n:
        raise DomainError(f"{path}: header says {n} values, found {arr.size}")
    return arr.astype(float)
