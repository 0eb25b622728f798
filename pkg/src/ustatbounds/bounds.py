"""Explicit martingale-moment constants and the U-statistic moment bounds.

Logarithms are natural throughout.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .model import centered_poisson_norm

OS_GRID_MAX = 1e4


def osekowski_os(p: float) -> float:
    """Osekowski's function ``4 sqrt(2) (p/4 + 1)^{1/p} (1 + p / ln(p/2))``.

    The formula is used for ``p >= 4``; on ``[2, 4)`` the value is held at
    ``Os(4)``.
    """
    if not p >= 2.0:
        raise DomainError("Os(p) is defined for p >= 2")
    p = max(float(p), 4.0)
    return 4.0 * math.sqrt(2.0) * (p / 4.0 + 1.0) ** (1.0 / p) * (1.0 + p / math.log(p / 2.0))


def _os_ratio(p: float) -> float:
    return osekowski_os(p) * math.log(p) / p


def _sup_os_ratio(lo: float, hi: float, points: int = 4096) -> tuple[float, float]:
    grid = np.geomspace(lo, hi, points)
    vals = np.array([_os_ratio(p) for p in grid])
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda p: -_os_ratio(p), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    best = max((vals[i], grid[i]), (-res.fun, res.x), (_os_ratio(lo), lo))
    return float(best[1]), float(best[0])


@functools.cache
def osekowski_constant() -> float:
    """``K_Os = sup_{p >= 4} Os(p) / (p / ln p)`` by grid scan plus bounded refinement."""
    return _sup_os_ratio(4.0, OS_GRID_MAX)[1]


def osekowski_maximizer() -> float:
    return _sup_os_ratio(4.0, OS_GRID_MAX)[0]


def gamma(d: int) -> float:
    """``gamma(1) = K_Os``, ``gamma(d+1) = gamma(d) K_Os (1 + 1/d)^d``."""
    if d < 1:
        raise DomainError("gamma is defined for d >= 1")
    return gamma_table(d)[-1]


def gamma_table(d_max: int) -> list[float]:
    k = osekowski_constant()
    out = [k]
    for d in range(1, d_max):
        out.append(out[-1] * k * (1.0 + 1.0 / d) ** d)
    return out


def gamma_envelope(d: int) -> float:
    """Closed-form majorant ``K_Os^d e^{d-1}`` of ``gamma(d)``."""
    return osekowski_constant() ** d * math.e ** (d - 1)


def _p_over_log(p: float) -> float:
    if not p >= 2.0:
        raise DomainError("moment order p must be >= 2")
    return p / math.log(p)


def martingale_moment_bound(m: int, p: float, phi_p: float) -> float:
    """``gamma(m) (p / ln p)^m |Phi|_p`` for a degree-``m`` polynomial martingale."""
    return gamma(m) * _p_over_log(p) ** m * phi_p


@dataclass(frozen=True)
class BoundInput:
    """Degree ``d``, rank ``r``, sample size ``n``, order ``p`` and ``|Phi|_p``."""

    d: int
    r: int
    n: int
    p: float
    phi_p: float

    def __post_init__(self) -> None:
        if not 1 <= self.r <= self.d:
            raise DomainError(f"need 1 <= r <= d, got r={self.r}, d={self.d}")
        if self.n < self.d:
            raise DomainError(f"need n >= d, got n={self.n}, d={self.d}")
        if not self.p >= 2.0:
            raise DomainError("p must be >= 2")
        if not self.phi_p > 0.0:
            raise DomainError("phi_p must be positive")


def moment_bound_detailed(b: BoundInput) -> float:
    """``sum_{m=r}^d gamma(m) C(d,m) C(n,m)^{-1/2} (p/ln p)^m |Phi|_p``, a bound on ``|U(n)|_p``."""
    t = _p_over_log(b.p)
    g = gamma_table(b.d)
    return math.fsum(
        g[m - 1] * math.comb(b.d, m) * math.comb(b.n, m) ** -0.5 * t**m * b.phi_p
        for m in range(b.r, b.d + 1)
    )


@dataclass(frozen=True)
class NormalizedBound:
    value: float  # bound on |U(n)/sigma(n)|_p
    c_eff: float  # value * sigma / (n^{-r/2} (p/ln p)^d |Phi|_p)
    detailed: float


def moment_bound_normalized(b: BoundInput, sigma_n: float) -> NormalizedBound:
    """Bound on ``|U(n)/sigma(n)|_p`` and the effective constant of the simplified form."""
    if not sigma_n > 0.0:
        raise DomainError("sigma_n must be positive")
    detailed = moment_bound_detailed(b)
    c_eff = detailed / (b.n ** (-b.r / 2.0) * _p_over_log(b.p) ** b.d * b.phi_p)
    return NormalizedBound(detailed / sigma_n, c_eff, detailed)


def _min_p_over_log(p_hi: float) -> float:
    # p/ln p decreases on [2, e] and increases afterwards
    return math.e if p_hi >= math.e else p_hi / math.log(p_hi)


def gls_constant(d: int, r: int, n: int, sigma_n: float, p_hi: float = math.inf) -> float:
    """``sup_{2 <= p <= p_hi}`` of the normalized bound divided by ``(p/ln p)^d |Phi|_p``.

    Every term carries ``(p/ln p)^{m-d}`` with ``m <= d``, so the supremum sits
    where ``p/ln p`` is smallest.
    """
    if not sigma_n > 0.0:
        raise DomainError("sigma_n must be positive")
    t = _min_p_over_log(p_hi)
    g = gamma_table(d)
    return math.fsum(
        g[m - 1] * math.comb(d, m) * math.comb(n, m) ** -0.5 * t ** (m - d) for m in range(r, d + 1)
    ) / sigma_n


def gls_constant_limit(d: int, r: int, sd_g_r: float, p_hi: float = math.inf) -> float:
    """Limit of :func:`gls_constant` as ``n -> infinity``: only the rank term survives."""
    return gamma(r) * _min_p_over_log(p_hi) ** (r - d) / sd_g_r


def lower_bound_ratio(d: int, p: float) -> float:
    """``|prod_{i<=d} xi_i|_p / (p/ln p)^d`` for i.i.d. centered unit-Poisson ``xi_i``.

    By independence ``|prod xi_i|_p = |xi|_p^d``.
    """
    if not 1 <= d <= 4:
        raise DomainError("d must lie in 1..4")
    return (centered_poisson_norm(p) / _p_over_log(p)) ** d
