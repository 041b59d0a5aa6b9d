"""Ready-made index spaces for the worked examples."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import erf

from .entropy import FiniteMetricSpace, gaussian_distance
from .errors import DomainError
from .sim import example_A_scale

__all__ = [
    "singleton",
    "two_point",
    "se_grid_cov",
    "gaussian_grid_space",
    "rayleigh_sign_tau",
    "example_A_space",
    "independent_space",
    "resolve_preset",
]


def singleton() -> FiniteMetricSpace:
    return FiniteMetricSpace((0,), np.zeros((1, 1)))


def two_point(d: float = 1.0) -> FiniteMetricSpace:
    return FiniteMetricSpace((0, 1), np.array([[0.0, d], [d, 0.0]]))


def se_grid_cov(m: int = 64, lengthscale: float = 0.25) -> np.ndarray:
    """Squared-exponential covariance on ``m`` equally spaced points of [0, 1]."""
    x = np.linspace(0.0, 1.0, m)
    return np.exp(-0.5 * ((x[:, None] - x[None, :]) / lengthscale) ** 2)


def gaussian_grid_space(m: int = 64, lengthscale: float = 0.25) -> FiniteMetricSpace:
    return gaussian_distance(se_grid_cov(m, lengthscale))


@lru_cache(maxsize=None)
def rayleigh_sign_tau() -> float:
    """B(lam**2/2) norm of a symmetric variable with ``P(|e| > x) = exp(-x**2/2)``.

    Its MGF is ``1 + lam exp(lam**2/2) sqrt(pi/2) erf(lam/sqrt(2))``; the
    norm is ``sup_lam sqrt(2 log M(lam)) / lam``.
    """
    lam = np.geomspace(1e-4, 60.0, 20001)
    logm = _log_mgf_rayleigh(lam)
    return float(np.max(np.sqrt(2.0 * logm) / lam))


def _log_mgf_rayleigh(lam: np.ndarray) -> np.ndarray:
    # log(1 + exp(y)) with y = log(lam sqrt(pi/2) erf(lam/sqrt 2)) + lam**2/2, stable for large lam
    y = np.log(lam * math.sqrt(math.pi / 2) * erf(lam / math.sqrt(2))) + 0.5 * lam**2
    return np.logaddexp(0.0, y)


def example_A_space(n_max: int, tau: float | None = None) -> FiniteMetricSpace:
    """Index set {1..n_max} for ``xi(n) = e(n) / c_n``, ``c_n = sqrt(log(n + e - 1))``.

    Coordinates are independent, so ``||xi(n) - xi(m)|| <= tau sqrt(1/c_n**2 + 1/c_m**2)``
    with ``tau`` the norm of e; this upper bound is used as the distance.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    tau = rayleigh_sign_tau() if tau is None else tau
    a = 1.0 / example_A_scale(n_max) ** 2
    d = tau * np.sqrt(a[:, None] + a[None, :])
    np.fill_diagonal(d, 0.0)
    return FiniteMetricSpace(tuple(range(1, n_max + 1)), d)


def independent_space(m: int, scale: float = 1.0) -> FiniteMetricSpace:
    """``m`` independent coordinates of norm ``scale``: all distances ``scale * sqrt(2)``."""
    d = np.full((m, m), scale * math.sqrt(2.0))
    np.fill_diagonal(d, 0.0)
    return FiniteMetricSpace(tuple(range(m)), d)


def resolve_preset(spec: str) -> FiniteMetricSpace:
    """``singleton``, ``two-point[:d]``, ``gaussian-grid[:m[,ls]]``,
    ``exampleA:n`` or ``independent:m``."""
    name, _, arg = spec.partition(":")
    args = [a for a in arg.split(",") if a]
    try:
        if name == "singleton":
            return singleton()
        if name == "two-point":
            return two_point(float(args[0]) if args else 1.0)
        if name == "gaussian-grid":
            m = int(args[0]) if args else 64
            ls = float(args[1]) if len(args) > 1 else 0.25
            return gaussian_grid_space(m, ls)
        if name == "exampleA":
            return example_A_space(int(args[0]))
        if name == "independent":
            return independent_space(int(args[0]))
    except (ValueError, IndexError) as e:
        raise DomainError(f"bad preset arguments in {spec!r}: {e}") from None
    raise DomainError(f"unknown preset {spec!r}")
