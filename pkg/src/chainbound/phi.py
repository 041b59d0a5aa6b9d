"""Young functions of the class Phi, their conjugates and inverses, and the
B(phi) / G(psi) norms estimated from samples.

Every function here is even, convex, vanishes at zero and grows
superlinearly towards the edge ``lambda0`` of its domain.  Closed-form
members carry a callable value and right derivative; tabulated members
(fitted from data) are piecewise linear on a nonnegative grid.
Conjugation uses a vectorized monotone bisection on the derivative, so the
maximizer returned with every conjugate value is the right derivative of
the conjugate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NonConvergence, Unbounded

__all__ = [
    "PhiFunction",
    "ConjugateTable",
    "PsiMomentScale",
    "NormEstimate",
    "subgaussian",
    "power_type",
    "tabulated",
    "fenchel_transform",
    "conjugate",
    "biconjugate",
    "conjugate_inverse",
    "phi_inverse",
    "gpsi_norm",
    "bphi_norm_mgf",
    "bphi_norm_from_logmgf",
    "natural_phi",
    "phi_n",
    "zeta",
    "check_phi",
    "default_lambda_grid",
    "tail_link_check",
    "TAIL_LINK_C3",
]

_MAX_ITERS = 400
_MAX_DOUBLINGS = 1100

# Constant of the moment-norm tail link P(|xi| > u) <= 2 exp(-u / (C3 g)).
# Markov's inequality at p = u / (e g) gives C3 = e whenever psi(p) <= p.
TAIL_LINK_C3 = math.e


def _bisect(g, target, lo, hi, rtol=4e-16):
    """Smallest x in [lo, hi] with g(x) >= target for nondecreasing g.

    Works elementwise on arrays; returns the upper end of the final bracket.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        below = g(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * np.abs(hi)):
            break
    return hi


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """A member of Phi restricted to ``(-lambda0, lambda0)``.

    ``func`` and ``deriv`` act on nonnegative arguments inside the domain;
    evenness is supplied by :meth:`__call__`.  Outside the domain the value
    is ``+inf`` (the convex extension), so norm constraints there are
    vacuous.
    """

    kind: str
    lambda0: float
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    curvature: float = 1.0
    params: dict = field(default_factory=dict)
    grid: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_tabulated(self) -> bool:
        return self.grid is not None

    def _inside(self, a):
        if self.is_tabulated:
            return a <= self.lambda0
        return a < self.lambda0

    def __call__(self, lam):
        a = np.abs(np.asarray(lam, dtype=float))
        inside = self._inside(a)
        out = np.full(a.shape, np.inf)
        if np.any(inside):
            out[inside] = self.func(a[inside])
        return out if out.ndim else float(out)

    def derivative(self, lam):
        """Right derivative, extended as an odd function."""
        lam = np.asarray(lam, dtype=float)
        a = np.abs(lam)
        inside = self._inside(a)
        out = np.full(a.shape, np.inf)
        if np.any(inside):
            out[inside] = self.deriv(a[inside])
        out = np.where(lam < 0, -out, out)
        return out if out.ndim else float(out)

    def _argmax(self, x):
        """Maximizer of lam*x - phi(lam) over [0, lambda0] and a flag array
        marking entries where the derivative condition is not bracketed."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("conjugate is evaluated on x >= 0 only")
        if self.is_tabulated:
            slopes = np.diff(self.values) / np.diff(self.grid)
            if slopes.size == 0:
                return np.zeros_like(x), x > 0
            j = np.searchsorted(slopes, x, side="right")
            return self.grid[j], x > slopes[-1]
        stuck = np.zeros(x.shape, dtype=bool)
        if math.isinf(self.lambda0):
            hi = np.ones_like(x)
            for _ in range(_MAX_DOUBLINGS):
                short = self.deriv(hi) < x
                if not np.any(short):
                    break
                hi = np.where(short, 2.0 * hi, hi)
            else:
                stuck = self.deriv(hi) < x
        else:
            edge = np.nextafter(self.lambda0, 0.0)
            hi = np.full(x.shape, edge)
            stuck = self.deriv(hi) < x
        lam = _bisect(self.deriv, x, 0.0, hi)
        lam = np.where(x == 0, 0.0, lam)
        return lam, stuck

    def conj_argmax(self, x):
        """Right derivative of the conjugate: the maximizer ``lam*(x)``."""
        lam, stuck = self._argmax(x)
        if np.any(stuck):
            bad = np.asarray(x, dtype=float)[stuck]
            raise NonConvergence(
                f"slope {bad.min():.6g} is beyond the representable range of {self.kind} phi"
            )
        return lam if np.ndim(lam) else float(lam)

    def conjugate(self, x):
        x = np.asarray(x, dtype=float)
        lam = np.asarray(self.conj_argmax(x))
        val = lam * x - self.func(lam)
        return val if val.ndim else float(val)

    def to_json(self) -> str:
        payload = {"kind": self.kind, "lambda0": _enc(self.lambda0)}
        if self.is_tabulated:
            payload["grid"] = self.grid.tolist()
            payload["values"] = self.values.tolist()
        else:
            payload["params"] = self.params
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "PhiFunction":
        obj = json.loads(text)
        if "grid" in obj:
            return tabulated(obj["grid"], obj["values"], kind=obj["kind"])
        params = obj.get("params", {})
        if obj["kind"] == "subgaussian":
            return subgaussian(params.get("sigma2", 1.0))
        if obj["kind"] == "power":
            return power_type(params["r"])
        raise DomainError(f"cannot rebuild phi of kind {obj['kind']!r} from JSON")


def _enc(v: float):
    return "inf" if math.isinf(v) else v


def _dec(v) -> float:
    return math.inf if v == "inf" else float(v)


def subgaussian(sigma2: float = 1.0) -> PhiFunction:
    """phi(lam) = sigma2 * lam**2 / 2."""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    return PhiFunction(
        kind="subgaussian",
        lambda0=math.inf,
        func=lambda a: 0.5 * sigma2 * a * a,
        deriv=lambda a: sigma2 * a,
        curvature=sigma2,
        params={"sigma2": sigma2},
    )


def power_type(r: float) -> PhiFunction:
    """Member of Phi whose conjugate grows like ``x**r / r``.

    For ``r > 1`` the function is ``lam**2/2`` on ``|lam| <= 1`` spliced
    (C^1) to ``|lam|**s / s + 1/2 - 1/s`` with ``s = r/(r-1)``.  For
    ``r == 1`` it is ``-log(1 - lam**2)/2`` on ``(-1, 1)``, the log-MGF
    of a standard Laplace variable scaled to unit curvature.
    """
    if r < 1:
        raise DomainError("power-type exponent r must be >= 1")
    if r == 1:
        return PhiFunction(
            kind="power",
            lambda0=1.0,
            func=lambda a: -0.5 * np.log1p(-a * a),
            deriv=lambda a: a / (1.0 - a * a),
            curvature=1.0,
            params={"r": 1.0},
        )
    s = r / (r - 1.0)
    shift = 0.5 - 1.0 / s

    def func(a):
        return np.where(a <= 1.0, 0.5 * a * a, a**s / s + shift)

    def deriv(a):
        return np.where(a <= 1.0, a, a ** (s - 1.0))

    return PhiFunction(
        kind="power", lambda0=math.inf, func=func, deriv=deriv,
        curvature=1.0, params={"r": float(r)},
    )


def tabulated(grid, values, kind: str = "custom") -> PhiFunction:
    """Piecewise-linear member of Phi from nonnegative ``grid`` (starting at 0)."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
        raise DomainError("grid and values must be 1-D of equal length >= 2")
    if grid[0] != 0.0 or values[0] != 0.0:
        raise DomainError("tabulated phi must start at (0, 0)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    slopes = np.diff(values) / np.diff(grid)
    if np.any(np.diff(slopes) < -1e-9 * (1.0 + np.abs(slopes[1:]))) or slopes[0] < -1e-12:
        raise DomainError("tabulated phi is not convex and nondecreasing")
    grid.setflags(write=False)
    values.setflags(write=False)

    def deriv(a):
        idx = np.clip(np.searchsorted(grid, a, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    h = grid[1]
    return PhiFunction(
        kind=kind,
        lambda0=float(grid[-1]),
        func=lambda a: np.interp(a, grid, values),
        deriv=deriv,
        curvature=2.0 * values[1] / (h * h),
        grid=grid,
        values=values,
    )


@dataclass(frozen=True, eq=False)
class ConjugateTable:
    """Tabulated conjugate ``phi*`` with its right derivative on ``grid``.

    Off-grid queries use the attached ``phi`` when available.  Otherwise the
    value is the tangent lower envelope of the neighbouring grid points and
    the slope is the upper neighbour's: both err on the side of a larger
    tail bound.
    """

    grid: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    kind: str = "custom"
    lambda0: float = math.inf
    phi: PhiFunction | None = field(default=None, repr=False)

    def _lookup(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.grid, x), 0, self.grid.size - 1)
        return x, i, self.grid[i] == x

    def value(self, x):
        x, i, hit = self._lookup(x)
        out = np.where(hit, self.values[i], 0.0)
        miss = ~hit
        if np.any(miss):
            xm = x[miss]
            if self.phi is not None:
                out[miss] = self.phi.conjugate(xm)
            else:
                j = np.clip(np.searchsorted(self.grid, xm) - 1, 0, self.grid.size - 1)
                k = np.clip(j + 1, 0, self.grid.size - 1)
                left = self.values[j] + self.slopes[j] * (xm - self.grid[j])
                right = self.values[k] + self.slopes[k] * (xm - self.grid[k])
                out[miss] = np.maximum(np.maximum(left, right), 0.0)
        return out if out.ndim else float(out)

    def slope(self, x):
        x, i, hit = self._lookup(x)
        out = np.where(hit, self.slopes[i], 0.0)
        miss = ~hit
        if np.any(miss):
            xm = x[miss]
            if self.phi is not None:
                out[miss] = self.phi.conj_argmax(xm)
            else:
                if np.any(xm > self.grid[-1]):
                    raise DomainError("slope requested beyond the conjugate table")
                out[miss] = self.slopes[np.searchsorted(self.grid, xm)]
        return out if out.ndim else float(out)

    def inverse(self, h):
        """Smallest x >= 0 with phi*(x) >= h."""
        h = np.asarray(h, dtype=float)
        if np.any(h < 0):
            raise DomainError("conjugate inverse needs h >= 0")
        hi = np.ones_like(h)
        for _ in range(_MAX_DOUBLINGS):
            short = np.asarray(self.value(hi)) < h
            if not np.any(short):
                break
            hi = np.where(short, 2.0 * hi, hi)
        x = _bisect(lambda t: np.asarray(self.value(t)), h, 0.0, hi, rtol=1e-13)
        x = np.where(h == 0, 0.0, x)
        return x if x.ndim else float(x)

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "lambda0": _enc(self.lambda0),
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "slopes": self.slopes.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ConjugateTable":
        obj = json.loads(text)
        return cls(
            grid=np.asarray(obj["grid"], dtype=float),
            values=np.asarray(obj["values"], dtype=float),
            slopes=np.asarray(obj["slopes"], dtype=float),
            kind=obj["kind"],
            lambda0=_dec(obj["lambda0"]),
        )


def fenchel_transform(phi: PhiFunction, x_grid) -> ConjugateTable:
    """Young-Fenchel transform ``phi*(x) = sup_lam (lam*x - phi(lam))`` on a grid.

    Raises
    ------
    DomainError
        If ``x_grid`` is empty, not increasing, or has negative entries.
    NonConvergence
        If some ``x`` exceeds every slope of ``phi`` inside its domain.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("x_grid must be a nonempty 1-D array")
    if np.any(x < 0):
        raise DomainError("x_grid must be nonnegative")
    if np.any(np.diff(x) <= 0):
        raise DomainError("x_grid must be strictly increasing")
    lam = np.asarray(phi.conj_argmax(x))
    values = lam * x - phi.func(lam)
    return ConjugateTable(
        grid=x, values=values, slopes=lam, kind=phi.kind,
        lambda0=phi.lambda0, phi=phi,
    )


def conjugate(phi: PhiFunction, x):
    return phi.conjugate(x)


def conjugate_inverse(phi: PhiFunction, h):
    """``(phi*)^{-1}(h)``: smallest x >= 0 with phi*(x) >= h."""
    table = ConjugateTable(grid=np.zeros(1), values=np.zeros(1), slopes=np.zeros(1), phi=phi)
    return table.inverse(h)


def biconjugate(phi: PhiFunction, lam):
    """``phi**(lam) = sup_x (lam*x - phi*(x))``, maximized over x by bisection
    on the conjugate's right derivative."""
    lam = np.abs(np.asarray(lam, dtype=float))

    def slope(x):
        return phi._argmax(x)[0]

    hi = np.ones_like(lam)
    for _ in range(_MAX_DOUBLINGS):
        short = slope(hi) < lam
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    x = _bisect(slope, lam, 0.0, hi)
    x = np.where(lam == 0, 0.0, x)
    xstar = slope(x)
    out = lam * x - (xstar * x - phi.func(xstar))
    return out if out.ndim else float(out)


def phi_inverse(phi: PhiFunction, p):
    """Unique ``lam >= 0`` with ``phi(lam) = p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError("phi_inverse needs p >= 0")
    if math.isinf(phi.lambda0):
        hi = np.ones_like(p)
        for _ in range(_MAX_DOUBLINGS):
            short = phi.func(hi) < p
            if not np.any(short):
                break
            hi = np.where(short, 2.0 * hi, hi)
    else:
        edge = phi.lambda0 if phi.is_tabulated else np.nextafter(phi.lambda0, 0.0)
        if np.any(phi.func(np.asarray(edge)) < p):
            raise DomainError(f"p exceeds sup of phi on [0, {phi.lambda0})")
        hi = np.full(p.shape, edge)
    out = _bisect(phi.func, p, 0.0, hi)
    out = np.where(p == 0, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PsiMomentScale:
    """``psi(p) = p / phi^{-1}(p)`` for ``p >= 2``."""

    phi: PhiFunction

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 2):
            raise DomainError("psi is defined for p >= 2")
        out = p / phi_inverse(self.phi, p)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    method: str
    grid_used: str

    def __float__(self):
        return self.value


def _abs_moment_roots(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Empirical ``E^{1/p}|x|^p`` computed relative to ``max|x|``."""
    a = np.abs(x)
    m = a.max()
    if m == 0:
        return np.zeros_like(p)
    r = a / m
    return m * np.array([np.mean(r**q) ** (1.0 / q) for q in p])


def gpsi_norm(samples, psi: PsiMomentScale, p_max: float = 16.0, n_grid: int = 64) -> NormEstimate:
    """Moment norm ``sup_{2<=p<=p_max} |xi|_p / psi(p)`` on a log-spaced p grid."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("samples must be nonempty")
    if p_max < 2:
        raise DomainError("p_max must be >= 2")
    p = np.geomspace(2.0, p_max, n_grid) if p_max > 2 else np.array([2.0])
    ratio = _abs_moment_roots(x, p) / psi(p)
    return NormEstimate(float(ratio.max()), "moment_sup", f"geomspace(2, {p_max:g}, {p.size})")


def default_lambda_grid(phi: PhiFunction, n: int = 60, lam_max: float = 4.0) -> np.ndarray:
    """Symmetric grid in ``(-lambda0, lambda0)`` excluding 0 and the endpoints."""
    top = min(lam_max, 0.95 * phi.lambda0)
    pos = np.geomspace(1e-2 * top, top, n)
    return np.concatenate([-pos[::-1], pos])


def _log_mgf(x: np.ndarray, lam: np.ndarray, clip: float | None):
    """Empirical log-MGF on ``lam`` and the mask of trusted grid points."""
    n = x.size
    lmgf = np.empty(lam.size)
    trusted = np.ones(lam.size, dtype=bool)
    for i, l in enumerate(lam):
        z = l * x
        lse = logsumexp(z)
        lmgf[i] = lse - math.log(n)
        if clip is not None:
            trusted[i] = math.exp(z.max() - lse) < clip
    return lmgf, trusted


def _contiguous_about_zero(lam: np.ndarray, trusted: np.ndarray) -> np.ndarray:
    keep = np.zeros_like(trusted)
    for side in (lam > 0, lam < 0):
        idx = np.flatnonzero(side)
        idx = idx[np.argsort(np.abs(lam[idx]))]
        for i in idx:
            if not trusted[i]:
                break
            keep[i] = True
    return keep


def bphi_norm_from_logmgf(lam, lmgf, phi: PhiFunction, rtol: float = 1e-12) -> float:
    """Smallest ``tau >= 0`` with ``lmgf(lam) <= phi(lam * tau)`` on every grid point."""
    lam = np.asarray(lam, dtype=float)
    lmgf = np.asarray(lmgf, dtype=float)
    if lam.size == 0:
        raise Unbounded("no usable lambda grid points")
    if np.all(lmgf <= 0):
        return 0.0

    def feasible(tau):
        return bool(np.all(phi(lam * tau) >= lmgf))

    hi = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise Unbounded("log-MGF exceeds phi(lam * tau) for every finite tau")
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    if not np.any(np.isfinite(phi(lam * hi))):
        raise Unbounded("constraint met only by leaving the domain of phi at every grid point")
    return hi


def bphi_norm_mgf(samples, phi: PhiFunction, lambda_grid=None, center: bool = True,
                  clip: float | None = 0.5) -> NormEstimate:
    """Sample analogue of the B(phi) norm via the empirical MGF.

    Grid points where the largest summand of the empirical MGF carries at
    least ``clip`` of the total are dropped (together with everything
    beyond them), since the MGF estimate is unreliable there.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("samples must be nonempty")
    if center:
        x = x - x.mean()
    lam = default_lambda_grid(phi) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    lam = lam[lam != 0]
    if np.all(x == 0):
        return NormEstimate(0.0, "mgf_fit", f"{lam.size} points, all zero sample")
    lmgf, trusted = _log_mgf(x, lam, clip)
    keep = _contiguous_about_zero(lam, trusted)
    tau = bphi_norm_from_logmgf(lam[keep], lmgf[keep], phi)
    used = lam[keep]
    desc = f"{used.size} of {lam.size} points, |lam| <= {np.abs(used).max():.4g}"
    return NormEstimate(tau, "mgf_fit", desc)


def natural_phi(sample_paths, lambda_grid, clip: float | None = 0.5,
                center: bool = True) -> PhiFunction:
    """Tabulated natural function ``lam -> log max_t E exp(lam xi(t))``.

    The table is symmetrized by taking the larger of the two signs, then
    replaced by its lower convex hull so it is a member of Phi.
    """
    X = np.asarray(sample_paths, dtype=float)
    if X.size == 0:
        raise DomainError("sample_paths must be nonempty")
    if X.ndim == 1:
        X = X[:, None]
    if center:
        X = X - X.mean(axis=0)
    lam = np.unique(np.abs(np.asarray(lambda_grid, dtype=float)))
    lam = lam[lam > 0]
    n = X.shape[0]
    colmax = X.max(axis=0)
    colmin = X.min(axis=0)
    table = np.empty(lam.size)
    trusted = np.ones(lam.size, dtype=bool)
    for i, l in enumerate(lam):
        best = -np.inf
        for sgn, top in ((1.0, colmax), (-1.0, -colmin)):
            lse = logsumexp(sgn * l * X, axis=0)
            best = max(best, float(np.max(lse)) - math.log(n))
            if clip is not None and np.any(np.exp(l * top - lse) >= clip):
                trusted[i] = False
        table[i] = max(best, 0.0)
    stop = np.flatnonzero(~trusted)
    if stop.size:
        lam, table = lam[: stop[0]], table[: stop[0]]
    if lam.size == 0:
        raise DomainError("no trusted lambda grid points for the empirical MGF")
    grid = np.concatenate([[0.0], lam])
    vals = _lower_hull(grid, np.concatenate([[0.0], table]))
    return tabulated(grid, vals, kind="natural")


def _lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Greatest convex minorant of the points (x, y), evaluated at x."""
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    out = np.interp(x, x[hull], y[hull])
    out[0] = 0.0
    return out


def phi_n(phi: PhiFunction, n: int) -> PhiFunction:
    """``lam -> n * phi(lam / sqrt(n))``, the function governing normalized sums."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    if phi.kind == "subgaussian" or n == 1:
        return phi
    rn = math.sqrt(n)
    if phi.is_tabulated:
        return tabulated(phi.grid * rn, phi.values * n, kind=phi.kind)
    return PhiFunction(
        kind="scaled",
        lambda0=phi.lambda0 * rn,
        func=lambda a: n * phi.func(a / rn),
        deriv=lambda a: rn * phi.deriv(a / rn),
        curvature=phi.curvature,
        params={"n": n, "base": phi.kind},
    )


def zeta(phi: PhiFunction, n_max: int) -> PhiFunction:
    """Pointwise sup of ``phi_n`` over ``n <= n_max`` and the Gaussian limit
    ``curvature * lam**2 / 2``."""
    if n_max < 1:
        raise DomainError("n_max must be a positive integer")
    if phi.kind == "subgaussian":
        return phi
    members = [phi_n(phi, n) for n in range(1, n_max + 1)]
    members.append(subgaussian(phi.curvature))

    def stack(a, attr):
        rows = []
        for m in members:
            inside = m._inside(a)
            row = np.full(a.shape, np.inf)
            row[inside] = getattr(m, attr)(a[inside])
            rows.append(row)
        return np.array(rows)

    def func(a):
        return stack(a, "func").max(axis=0)

    def deriv(a):
        vals = stack(a, "func")
        ders = stack(a, "deriv")
        top = vals.max(axis=0)
        return np.where(vals >= top - 1e-15 * np.abs(top), ders, -np.inf).max(axis=0)

    return PhiFunction(
        kind="zeta", lambda0=phi.lambda0, func=func, deriv=deriv,
        curvature=phi.curvature, params={"n_max": n_max, "base": phi.kind},
    )


def check_phi(phi: PhiFunction, lam_max: float | None = None, n: int = 200) -> None:
    """Raise DomainError if ``phi`` visibly violates membership in Phi."""
    problems = []
    top = phi.lambda0 if phi.is_tabulated else min(lam_max or 8.0, 0.999 * phi.lambda0)
    lam = np.linspace(0.0, top, n) if not phi.is_tabulated else phi.grid
    v = np.asarray(phi(lam))
    if v[0] != 0:
        problems.append("phi(0) != 0")
    if not np.allclose(phi(-lam), v, rtol=0, atol=0):
        problems.append("phi is not even")
    d2 = np.diff(v, 2) if not phi.is_tabulated else np.diff(np.diff(v) / np.diff(lam))
    if np.any(d2 < -1e-12 * (1 + np.abs(v[2:]).max())):
        problems.append("phi is not convex")
    if not phi.curvature > 0:
        problems.append("phi''(0) is not positive")
    if not phi.is_tabulated:
        a, b = lam[1:-1], lam[2:]
        mid = np.asarray(phi(0.5 * (a + b)))
        gap = 0.5 * (np.asarray(phi(a)) + np.asarray(phi(b))) - mid
        if np.any(gap <= 0):
            problems.append("phi is not strictly convex")
        geo = np.geomspace(1e-3 * top, top, 40)
        ratio = np.asarray(phi(geo)) / geo
        if np.any(np.diff(ratio) <= 0):
            problems.append("phi(lam)/lam is not increasing")
    if problems:
        raise DomainError("; ".join(problems))


def tail_link_check(samples, psi: PsiMomentScale, u_grid, c3: float = TAIL_LINK_C3,
                    p_max: float = 16.0):
    """Compare the empirical two-sided tail with ``2 exp(-u / (c3 * g))``.

    Returns the per-u boolean array and the moment norm ``g`` used.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    g = gpsi_norm(x, psi, p_max=p_max).value
    u = np.asarray(u_grid, dtype=float)
    emp = np.array([(x > t).mean() for t in u])
    if g == 0:
        return emp == 0, g
    return emp <= 2.0 * np.exp(-u / (c3 * g)), g
