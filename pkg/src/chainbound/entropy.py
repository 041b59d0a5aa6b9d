"""Finite semi-metric spaces, natural distances, epsilon-nets, covering
numbers and the generalized entropy integral."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeLimit, TriangleViolation
from .phi import ConjugateTable, PhiFunction, bphi_norm_mgf, fenchel_transform

__all__ = [
    "FiniteMetricSpace",
    "EpsilonNet",
    "EntropyIntegral",
    "gaussian_distance",
    "natural_distance",
    "repair_metric",
    "covering_number",
    "entropy",
    "entropy_integral",
    "EXACT_LIMIT",
]

EXACT_LIMIT = 20
_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Labels plus a symmetric, zero-diagonal, nonnegative distance matrix."""

    labels: tuple
    dist: np.ndarray

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        labels = tuple(self.labels)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(labels):
            raise DomainError("dist must be square and match the labels")
        if len(set(labels)) != len(labels):
            raise DomainError("labels must be unique")
        if np.any(~np.isfinite(d)) or np.any(d < 0):
            raise DomainError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise DomainError("diagonal must be zero")
        if not np.array_equal(d, d.T):
            raise DomainError("dist must be symmetric")
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    @classmethod
    def from_points(cls, points, labels=None) -> "FiniteMetricSpace":
        """Euclidean space on the rows of ``points`` (1-D input is a line)."""
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        d = 0.5 * (d + d.T)
        return cls(tuple(range(len(p))) if labels is None else labels, d)

    def __len__(self):
        return len(self.labels)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if len(self) else 0.0

    def index(self, labels) -> np.ndarray:
        pos = {l: i for i, l in enumerate(self.labels)}
        try:
            return np.array([pos[l] for l in labels], dtype=int)
        except KeyError as e:
            raise DomainError(f"unknown label {e.args[0]!r}") from None

    def subspace(self, idx) -> "FiniteMetricSpace":
        idx = np.asarray(idx, dtype=int)
        return FiniteMetricSpace(tuple(self.labels[i] for i in idx), self.dist[np.ix_(idx, idx)])

    def scaled(self, c: float) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.labels, self.dist * c)

    def triangle_excess(self) -> float:
        """Largest ``d(t,s) - d(t,v) - d(v,s)`` over all triples."""
        d = self.dist
        two_hop = (d[:, :, None] + d[None, :, :]).min(axis=1)
        return float((d - two_hop).max())

    def to_json(self) -> str:
        return json.dumps({"labels": list(self.labels), "dist": self.dist.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FiniteMetricSpace":
        obj = json.loads(text)
        return cls(tuple(obj["labels"]), np.asarray(obj["dist"], dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for row in self.dist:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FiniteMetricSpace":
        """Header of labels, then either a full or a lower-triangular matrix."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise DomainError("empty CSV")
        labels = tuple(rows[0])
        n = len(labels)
        body = rows[1:]
        if len(body) != n:
            raise DomainError(f"expected {n} matrix rows, got {len(body)}")
        d = np.zeros((n, n))
        # the layout is fixed by the first row: n entries means a full matrix
        lower = n > 1 and len([v for v in body[0] if v.strip() != ""]) == 1
        for i, row in enumerate(body):
            vals = [float(v) for v in row if v.strip() != ""]
            if not lower and len(vals) == n:
                d[i] = vals
            elif lower and len(vals) == i + 1:
                d[i, : i + 1] = vals
                d[: i + 1, i] = vals
            else:
                raise DomainError(f"row {i + 1} has {len(vals)} entries")
        return cls(labels, d)

    @classmethod
    def load(cls, path: str) -> "FiniteMetricSpace":
        with open(path) as fh:
            text = fh.read()
        if path.endswith(".json"):
            return cls.from_json(text)
        return cls.from_csv(text)


def gaussian_distance(cov, labels=None) -> FiniteMetricSpace:
    """Natural distance of a centered Gaussian field under ``lam**2/2``:
    ``sqrt(D(t,t) - 2 D(t,s) + D(s,s))``."""
    D = np.asarray(cov, dtype=float)
    v = np.diag(D)
    sq = np.maximum(v[:, None] - 2.0 * D + v[None, :], 0.0)
    d = np.sqrt(0.5 * (sq + sq.T))
    np.fill_diagonal(d, 0.0)
    return FiniteMetricSpace(tuple(range(len(D))) if labels is None else labels, d)


def _metric_closure(d: np.ndarray) -> np.ndarray:
    """Largest semi-metric below ``d``: shortest-path (Floyd-Warshall) closure."""
    d = d.copy()
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :], out=d)
    return d


def repair_metric(d, tol: float = 1e-3) -> np.ndarray:
    """Shortest-path closure of a symmetric matrix.

    Raises TriangleViolation when some entry drops by more than ``tol``
    relative to its original value.
    """
    d = np.asarray(d, dtype=float)
    fixed = _metric_closure(d)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(d > 0, (d - fixed) / np.where(d > 0, d, 1.0), 0.0)
    if rel.max() > tol:
        i, j = np.unravel_index(np.argmax(rel), rel.shape)
        raise TriangleViolation(
            f"triangle repair changed d[{i},{j}] by {rel.max():.3g} relative; "
            "increase the number of replicates"
        )
    return fixed


def natural_distance(sample_paths, phi: PhiFunction, lambda_grid=None, labels=None,
                     repair_tol: float = 1e-3) -> FiniteMetricSpace:
    """Pairwise B(phi) norms of coordinate differences.

    Estimated norms may violate the triangle inequality slightly; the matrix
    is replaced by its shortest-path closure, and a relative change beyond
    ``repair_tol`` is reported as under-sampled norms.
    """
    X = np.asarray(sample_paths, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise DomainError("need a replicate x index matrix with >= 2 indices")
    m = X.shape[1]
    d = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            diff = X[:, i] - X[:, j]
            if np.all(diff == diff[0]):
                v = 0.0
            else:
                v = bphi_norm_mgf(diff, phi, lambda_grid).value
            d[i, j] = d[j, i] = v
    fixed = repair_metric(d, repair_tol)
    return FiniteMetricSpace(tuple(range(m)) if labels is None else labels, fixed)


@dataclass(frozen=True)
class EpsilonNet:
    epsilon: float
    centers: tuple
    assignment: dict

    def check(self, space: FiniteMetricSpace) -> bool:
        pos = {l: i for i, l in enumerate(space.labels)}
        return all(space.dist[pos[t], pos[c]] <= self.epsilon for t, c in self.assignment.items())


def _cover_matrix(space, idx, eps):
    return space.dist[np.ix_(idx, idx)] <= eps


def _greedy(cover: np.ndarray) -> list[int]:
    n = cover.shape[0]
    uncovered = np.ones(n, dtype=bool)
    counts = cover.sum(axis=1).astype(int)
    chosen = []
    while uncovered.any():
        c = int(np.argmax(counts))
        chosen.append(c)
        newly = cover[c] & uncovered
        uncovered &= ~newly
        counts -= cover[:, newly].sum(axis=1)
    return chosen


def _exact(cover: np.ndarray) -> list[int]:
    """Minimum set cover by depth-first branch and bound on bitmasks."""
    n = cover.shape[0]
    masks = [int(sum(1 << j for j in np.flatnonzero(cover[i]))) for i in range(n)]
    full = (1 << n) - 1
    best = _greedy(cover)
    maxcover = max(bin(m).count("1") for m in masks)
    # balls containing each point, largest first
    holders = [sorted((i for i in range(n) if masks[i] >> j & 1),
                      key=lambda i: -bin(masks[i]).count("1")) for j in range(n)]

    def search(covered, chosen):
        nonlocal best
        left = full & ~covered
        if not left:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        need = -(-bin(left).count("1") // maxcover)
        if len(chosen) + need >= len(best):
            return
        j = (left & -left).bit_length() - 1
        for i in holders[j]:
            chosen.append(i)
            search(covered | masks[i], chosen)
            chosen.pop()

    search(0, [])
    return sorted(best)


def covering_number(space: FiniteMetricSpace, subset=None, epsilon: float = 1.0,
                    mode: str = "greedy", exact_limit: int = EXACT_LIMIT):
    """Number of closed ``epsilon``-balls centred in ``subset`` that cover it.

    Returns ``(count, EpsilonNet)``.  ``mode`` is ``"exact"`` or
    ``"greedy"``; greedy ties go to the lowest index.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    labels = space.labels if subset is None else tuple(subset)
    if not labels:
        raise DomainError("subset must be nonempty")
    idx = space.index(labels)
    cover = _cover_matrix(space, idx, epsilon)
    if mode == "exact":
        if len(idx) > exact_limit:
            raise SizeLimit(f"exact cover limited to {exact_limit} points, got {len(idx)}")
        chosen = _exact(cover)
    elif mode == "greedy":
        chosen = _greedy(cover)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    sub = space.dist[np.ix_(idx, idx[chosen])]
    near = np.argmin(sub, axis=1)
    assignment = {labels[i]: labels[chosen[near[i]]] for i in range(len(idx))}
    net = EpsilonNet(float(epsilon), tuple(labels[c] for c in chosen), assignment)
    return len(chosen), net


def entropy(space: FiniteMetricSpace, subset=None, epsilon: float = 1.0, mode: str = "auto") -> float:
    """``log N``; ``mode="auto"`` is exact up to the size limit, greedy beyond."""
    n = len(space) if subset is None else len(tuple(subset))
    if mode == "auto":
        mode = "exact" if n <= EXACT_LIMIT else "greedy"
    count, _ = covering_number(space, subset, epsilon, mode)
    return math.log(count)


@dataclass(frozen=True)
class EntropyIntegral:
    value: float
    divergent_trend: bool
    octave_contributions: tuple

    def __float__(self):
        return self.value


def entropy_integral(space: FiniteMetricSpace, phi: PhiFunction | ConjugateTable,
                     eps_grid=None, mode: str = "auto", tol: float = 1e-3) -> EntropyIntegral:
    """Integral of ``eps -> (phi*)^{-1}(H(T, d, eps))`` over ``(0, 1]``.

    The entropy of a finite space is a step function of ``eps``, so each
    grid interval is evaluated at its midpoint rather than at the jumps.
    Below the smallest grid point the entropy is frozen at its value there,
    which is exact once the grid goes under the minimal positive distance.
    The divergence flag is raised when the last three octave contributions
    do not decrease and exceed ``tol``.
    """
    if eps_grid is None:
        eps_grid = np.geomspace(1.0, 2.0**-12, 12 * 8 + 1)
    eps = np.sort(np.asarray(eps_grid, dtype=float))
    if eps[0] <= 0 or eps[-1] > 1:
        raise DomainError("eps_grid must lie in (0, 1]")
    table = phi if isinstance(phi, ConjugateTable) else fenchel_transform(phi, np.array([0.0]))
    if eps[-1] < 1:
        eps = np.append(eps, 1.0)
    pts = np.concatenate([[0.5 * eps[0]], 0.5 * (eps[:-1] + eps[1:])])
    H = np.array([entropy(space, None, e, mode) for e in pts])
    f = np.asarray(table.inverse(H), dtype=float)
    return _integrate(eps, f, tol)


def _integrate(eps: np.ndarray, f: np.ndarray, tol: float) -> EntropyIntegral:
    """Sum of ``f[k]`` times the width of the k-th cell ``(eps[k-1], eps[k]]``
    with ``eps[-1] = 0``, plus octave bookkeeping."""
    widths = np.diff(np.concatenate([[0.0], eps]))
    pieces = f * widths
    value = float(pieces.sum())
    octaves = []
    hi = eps[-1]
    while hi / 2 >= eps[0] * (1 - 1e-12):
        m = (eps > hi / 2 * (1 + 1e-12)) & (eps <= hi * (1 + 1e-12))
        octaves.append(float(pieces[m].sum()))
        hi /= 2
    last = octaves[-3:]
    divergent = len(last) == 3 and last[-1] > tol and all(b >= a * (1 - 1e-9) for a, b in zip(last, last[1:]))
    return EntropyIntegral(value, divergent, tuple(octaves))
