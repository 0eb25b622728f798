"""Grand Lebesgue Space layer.

A psi-function ``psi`` on ``[2, b)`` defines the norm
``||zeta|| = sup_p |zeta|_p / psi(p)``. Moment growth converts to tail decay
through the Young-Fenchel conjugate of ``nu(p) = p ln psi(p)``:
``T(y) <= exp(-nu*(ln(y / ||zeta||)))``.

All sups over ``p`` run on a log-spaced grid over ``[2, min(b, 1e4)]``.
Grid-only sups under-estimate a conjugate, which over-estimates the derived
tail envelope; every envelope produced here therefore errs on the safe side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import bounds
from .errors import DivergentNorm, DomainError, QuadratureFailure, Unbounded
from .hoeffding import ProjectionSet, decompose, variance_exact
from .model import CenteredKernel, DiscreteDistribution, LpMoments

P_MIN = 2.0
P_HI = 1e4
GRID_POINTS = 512
REFINE_ROUNDS = 3
DIVERGENCE_RATE = 0.01  # per decade of p at the truncated boundary
ENVELOPE_POINTS = 2048


@dataclass(frozen=True, eq=False)
class PsiFunction:
    """A psi-function on ``[2, b)`` (``[2, b]`` when ``b`` is finite).

    Attributes
    ----------
    log_func : callable
        ``p -> ln psi(p)`` for scalar ``p``; log form keeps ``exp(C p^beta)``
        families finite.
    b : float
        Upper support endpoint.
    family : str
        One of ``power-log``, ``exp-beta``, ``natural``, ``custom``.
    strict : bool
        Enforce ``inf psi > 1`` in :meth:`validate`. Natural psi-functions of
        unit-variance kernels start at ``psi(2) = 1`` and are exempt.
    """

    log_func: Callable[[float], float]
    b: float = math.inf
    family: str = "custom"
    strict: bool = True

    def __post_init__(self) -> None:
        if not self.b > P_MIN:
            raise DomainError("psi support endpoint b must exceed 2")

    @classmethod
    def from_function(cls, func: Callable[[float], float], b: float = math.inf,
                      family: str = "custom", strict: bool = True) -> "PsiFunction":
        return cls(lambda p: math.log(func(p)), b, family, strict)

    def log(self, p):
        if np.ndim(p) == 0:
            return float(self.log_func(float(p)))
        return np.array([self.log_func(float(q)) for q in np.asarray(p, dtype=float)])

    def __call__(self, p):
        return np.exp(self.log(p))

    @property
    def p_hi(self) -> float:
        return min(self.b, P_HI)

    def p_grid(self, points: int = GRID_POINTS) -> np.ndarray:
        return np.geomspace(P_MIN, self.p_hi, points)

    def validate(self, points: int = GRID_POINTS) -> None:
        """Check finiteness, the lower bound and continuity on the p-grid.

        A jump that survives grid doubling (the largest step in ``ln psi`` does
        not shrink by at least 10%) is reported as a discontinuity.
        """
        coarse = self.log(self.p_grid(points))
        fine = self.log(self.p_grid(2 * points - 1))
        if not np.all(np.isfinite(fine)):
            raise DomainError("psi must be finite on its support")
        if self.strict and np.min(fine) <= 0.0:
            raise DomainError("psi must be bounded below by a constant > 1")
        jc, jf = np.max(np.abs(np.diff(coarse))), np.max(np.abs(np.diff(fine)))
        if jc > 1e-6 and jf > 0.9 * jc:
            raise DomainError("psi appears discontinuous on its support")


def power_log_psi(c: float, m: float, r: float) -> PsiFunction:
    """``c p^{1/m} (ln p)^r``."""
    if not (c > 0 and m > 0):
        raise DomainError("need c > 0 and m > 0")
    return PsiFunction(lambda p: math.log(c) + math.log(p) / m + r * math.log(math.log(p)), family="power-log")


def exp_beta_psi(c: float, beta: float) -> PsiFunction:
    """``exp(c p^beta)``: moments of variables without an exponential moment."""
    if not (c > 0 and beta > 0):
        raise DomainError("need c > 0 and beta > 0")
    return PsiFunction(lambda p: c * p**beta, family="exp-beta")


def constant_psi(c: float) -> PsiFunction:
    return PsiFunction(lambda p: math.log(c), family="custom")


def natural_psi(k, dist: DiscreteDistribution | None = None) -> PsiFunction:
    """``psi(p) = |Phi|_p``; the support ends at the law's ``moment_limit``."""
    if dist is None:
        dist = k.dist
    lp = LpMoments(k, dist)
    return PsiFunction(lambda p: lp.log_moment(p) / p, b=dist.moment_limit, family="natural", strict=False)


def psi_d_transform(psi: PsiFunction, d: int) -> PsiFunction:
    """``psi_d(p) = (p / ln p)^d psi(p)``; ``d = 0`` returns ``psi`` itself."""
    if d < 0:
        raise DomainError("d must be >= 0")
    if d == 0:
        return psi
    base = psi.log_func
    return PsiFunction(lambda p: d * math.log(p / math.log(p)) + base(p), psi.b, psi.family, psi.strict)


def nu(psi: PsiFunction, p: float) -> float:
    """``nu(p) = p ln psi(p)`` on the support of ``psi``."""
    if not P_MIN <= p <= psi.b or p == math.inf:
        raise DomainError(f"p={p} outside the support [2, {psi.b})")
    return p * psi.log(p)


# --------------------------------------------------------------------------
# sups and conjugates


def _refine_max(obj: Callable[[float], float], grid: np.ndarray, vals: np.ndarray) -> tuple[float, float]:
    """Local refinement of a grid maximum; returns ``(argmax, max)``."""
    i = int(np.argmax(vals))
    best_x, best = float(grid[i]), float(vals[i])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if b > a:
        res = minimize_scalar(lambda x: -obj(x), bounds=(a, b), method="bounded", options={"xatol": 1e-10 * b})
        if -res.fun > best:
            best_x, best = float(res.x), float(-res.fun)
    return best_x, best


def young_fenchel(f: Callable[[float], float], y: float, lo: float = P_MIN, hi: float = math.inf,
                  points: int = GRID_POINTS, grid_hi: float = P_HI) -> float:
    """``f*(y) = sup_{lo <= x <= hi} (x y - f(x))``.

    Dense log-grid scan followed by bounded Brent refinement around the
    incumbent, so boundary maximizers are returned exactly.

    Raises
    ------
    Unbounded
        If ``hi`` is infinite and the objective still increases at the end of
        the scanned range.
    """
    top = min(hi, grid_hi)
    grid = np.geomspace(lo, top, points) if lo > 0 else np.linspace(lo, top, points)

    def obj(x: float) -> float:
        return x * y - f(x)

    vals = np.array([obj(float(x)) for x in grid])
    if math.isinf(hi) and int(np.argmax(vals)) == grid.size - 1 and vals[-1] > vals[-2]:
        raise Unbounded(f"objective x*{y} - f(x) still increasing at x={top:g}")
    return _refine_max(obj, grid, vals)[1]


def _grid_conjugate(p: np.ndarray, nu_vals: np.ndarray, ys: np.ndarray, block: int = 512) -> np.ndarray:
    out = np.empty(ys.size)
    for s in range(0, ys.size, block):
        chunk = ys[s:s + block]
        out[s:s + block] = np.max(np.outer(chunk, p) - nu_vals, axis=1)
    return out


@dataclass(frozen=True, eq=False)
class TailFunction:
    """``x -> T(x)``: nonincreasing, values in ``[0, 1]``; vectorized."""

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "tail"

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        out = np.clip(np.asarray(self.func(np.atleast_1d(np.asarray(x, dtype=float))), dtype=float), 0.0, 1.0)
        return float(out[0]) if scalar else out

    def is_nonincreasing(self, xs) -> bool:
        v = self(np.sort(np.asarray(xs, dtype=float)))
        return bool(np.all(np.diff(v) <= 1e-15))

    def scaled(self, c: float) -> "TailFunction":
        """Tail of ``c * zeta``."""
        return TailFunction(lambda x: self.func(np.asarray(x) / c), f"{self.name}*{c:g}")


def _nu_grid(psi: PsiFunction, points: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.geomspace(P_MIN, psi.p_hi, points)
    if math.isfinite(psi.b):
        p[-1] = psi.b
    return p, p * psi.log(p)


def tail_envelope(psi: PsiFunction, norm: float, points: int = ENVELOPE_POINTS) -> TailFunction:
    """``x -> exp(-nu*(ln(x / norm)))`` for ``x > e * norm`` and ``1`` below."""
    if not norm > 0.0:
        raise DomainError("norm must be positive")
    p, nu_vals = _nu_grid(psi, points)

    def func(x: np.ndarray) -> np.ndarray:
        out = np.ones(x.shape)
        live = x > math.e * norm
        if np.any(live):
            out[live] = np.exp(-_grid_conjugate(p, nu_vals, np.log(x[live] / norm)))
        return out

    return TailFunction(func, f"envelope[{psi.family}]")


def moment_markov_envelope(log_moment_bound: Callable[[float], float], p_grid: np.ndarray) -> TailFunction:
    """``x -> min(1, inf_p exp(log_moment_bound(p)) / x^p)`` over the given orders."""
    p = np.asarray(p_grid, dtype=float)
    lm = np.array([log_moment_bound(q) for q in p])

    def func(x: np.ndarray) -> np.ndarray:
        out = np.ones(x.shape)
        pos = x > 0
        if np.any(pos):
            out[pos] = np.exp(np.minimum(0.0, np.min(lm[None, :] - np.outer(np.log(x[pos]), p), axis=1)))
        return out

    return TailFunction(func, "markov")


def gls_norm(moments: Callable[[float], float], psi: PsiFunction, p_grid=None,
             points: int = GRID_POINTS, refine_rounds: int = REFINE_ROUNDS) -> float:
    """``sup_p |zeta|_p / psi(p)``.

    With an explicit ``p_grid`` (e.g. orders at which empirical moments were
    estimated) the sup is taken over those orders only.

    Raises
    ------
    DivergentNorm
        When ``b`` exceeds the grid's upper end and the ratio still grows by
        more than 1% per decade there.
    """
    def log_ratio(p: float) -> float:
        m = moments(p)
        return (math.log(m) if m > 0 else -math.inf) - psi.log(p)

    if p_grid is not None:
        grid = np.asarray(p_grid, dtype=float)
        return float(np.exp(np.max([log_ratio(float(p)) for p in grid])))

    grid = psi.p_grid(points)
    if math.isfinite(psi.b) and psi.b <= P_HI:
        grid[-1] = psi.b
    vals = np.array([log_ratio(float(p)) for p in grid])
    if psi.b > P_HI and int(np.argmax(vals)) >= grid.size - 2:
        decade_back = log_ratio(max(P_MIN, grid[-1] / 10.0))
        if vals[-1] - decade_back > math.log1p(DIVERGENCE_RATE):
            raise DivergentNorm(f"|zeta|_p / psi(p) still growing at p={grid[-1]:g}")
    best = float(np.max(vals))
    for _ in range(refine_rounds):
        i = int(np.argmax(vals))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        grid = np.linspace(a, b, 33)
        vals = np.array([log_ratio(float(p)) for p in grid])
        best = max(best, float(np.max(vals)))
    return math.exp(best)


def norm_from_tail(tail: TailFunction, psi: PsiFunction, p_hi: float | None = None, points: int = GRID_POINTS,
                   per_decade: int = 1000, x_lo: float = 1e-6, x_max: float = 1e300) -> float:
    """Gpsi norm implied by a tail bound.

    Moments come from ``E|zeta|^p = p int x^{p-1} P(|zeta| > x) dx`` with
    ``P(|zeta| > x) <= min(1, 2 T(x))``. The integral is an upper Riemann sum
    on a log-spaced x-grid (an upper bound for nonincreasing ``T``), extended
    decade by decade until a decade contributes below ``1e-18`` of the running
    total for every order.

    Raises
    ------
    QuadratureFailure
        If the tail decays too slowly for the requested orders.
    """
    top = min(psi.b, p_hi if p_hi is not None else 1e3)
    p = np.geomspace(P_MIN, top, points)
    log_total = p * math.log(x_lo)  # [0, x_lo] contributes at most x_lo^p
    prev = -np.inf
    lo = x_lo
    while True:
        if lo >= x_max:
            raise QuadratureFailure("tail decays too slowly for the requested moment orders")
        x = np.geomspace(lo, lo * 10.0, per_decade + 1)
        with np.errstate(divide="ignore"):
            log_h = np.log(np.minimum(1.0, 2.0 * tail(x[:-1])))
        lx = np.log(x)
        # segment [x_i, x_{i+1}] contributes at most h(x_i) (x_{i+1}^p - x_i^p)
        seg = log_h[:, None] + p[None, :] * lx[1:, None] + np.log(-np.expm1(-np.outer(np.diff(lx), p)))
        block = logsumexp(seg, axis=0)
        log_total = np.logaddexp(log_total, block)
        if np.all(block - log_total < math.log(1e-18)) and np.all(block <= prev):
            break
        prev = block
        lo *= 10.0
    return float(np.exp(np.max(log_total / p - psi.log(p))))


# --------------------------------------------------------------------------
# Orlicz layer


def young_orlicz(psi: PsiFunction, points: int = ENVELOPE_POINTS) -> Callable[[np.ndarray], np.ndarray]:
    """``M(u) = exp(nu*(ln|u|))`` for ``|u| > e``, ``exp(C u^2) - 1`` below.

    ``C`` makes ``M`` continuous at ``|u| = e``.
    """
    p, nu_vals = _nu_grid(psi, points)
    at_e = float(_grid_conjugate(p, nu_vals, np.array([1.0]))[0])
    c = float(np.logaddexp(0.0, at_e)) / math.e**2

    def m(u):
        a = np.abs(np.atleast_1d(np.asarray(u, dtype=float)))
        with np.errstate(over="ignore"):
            out = np.expm1(c * a**2)
            big = a > math.e
            if np.any(big):
                out[big] = np.exp(_grid_conjugate(p, nu_vals, np.log(a[big])))
        return out

    return m


# --------------------------------------------------------------------------
# U-statistics in Gpsi


@dataclass(frozen=True)
class UniformBound:
    """``sup_n ||U(n)/sigma(n)||_{Gpsi_d} <= constant * ||Phi||_{Gpsi}``."""

    constant: float
    phi_norm: float
    bound: float
    d: int
    r: int
    n_max: int


def uniform_bound(k, psi: PsiFunction | None = None, n_max: int = 1000) -> tuple[UniformBound, PsiFunction]:
    """Uniform-in-``n`` Gpsi_d bound for the normalized U-statistic.

    The constant is the largest effective constant of the detailed moment
    bound over ``d <= n <= n_max`` and its ``n -> infinity`` limit. Returns
    the bound and ``psi_d``.
    """
    ps: ProjectionSet = k if isinstance(k, ProjectionSet) else decompose(k)
    kern: CenteredKernel = ps.kernel
    d, r = ps.degree, ps.rank
    if psi is None:
        psi = natural_psi(kern)
    phi_norm = gls_norm(LpMoments(kern, kern.dist), psi)
    consts = [bounds.gls_constant(d, r, n, math.sqrt(variance_exact(ps, n)), psi.b) for n in range(d, n_max + 1)]
    consts.append(bounds.gls_constant_limit(d, r, math.sqrt(float(ps.variances[r - 1])), psi.b))
    c = max(consts)
    return UniformBound(c, phi_norm, c * phi_norm, d, r, n_max), psi_d_transform(psi, d)
