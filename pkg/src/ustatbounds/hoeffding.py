"""Exact Hoeffding decomposition for kernels under finite-support laws.

Projections are tables over ``support**m``. The degree-``m`` projection is
obtained from the conditional kernels ``Phi_j = E[Phi | x_1..x_j]`` through
the inclusion-exclusion expansion

    g_m(x_1..x_m) = sum_{A subset of {1..m}} (-1)^{m-|A|} Phi_{|A|}(x_A)

which is exact for finite support and costs ``O(2^m s^m)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityMismatch, DomainError, TrivialKernel
from .model import DEFAULT_CAP, CenteredKernel, DiscreteDistribution, support_table
from .ustat import evaluate

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SupportFunction:
    """A symmetric function of ``arity`` support points, stored as a table."""

    table: np.ndarray
    dist: DiscreteDistribution
    name: str = "g"

    @property
    def arity(self) -> int:
        return self.table.ndim

    def __call__(self, *xs) -> np.ndarray:
        if len(xs) != self.arity:
            raise ArityMismatch(f"{self.name} takes {self.arity} arguments")
        if self.arity == 0:
            return np.asarray(self.table, dtype=float)
        idx = np.broadcast_arrays(*(self.dist.index_of(x) for x in xs))
        return self.table[tuple(idx)]

    def evaluate_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        return self(*rows.T)

    def variance(self) -> float:
        """``E g^2`` minus ``(E g)^2`` under the product law."""
        w = self.dist.probs
        mean = self.table
        second = self.table**2
        for _ in range(self.arity):
            mean = mean @ w
            second = second @ w
        return float(second - mean**2)

    def degeneracy_error(self) -> float:
        """Largest ``|E_y g(x_1..x_{m-1}, y)|`` over all fixings of the other arguments."""
        if self.arity == 0:
            return abs(float(self.table))
        return float(np.max(np.abs(self.table @ self.dist.probs)))


def _kernel_table(k: CenteredKernel, cap: int) -> np.ndarray:
    return support_table(k, k.dist, cap)


def conditional_kernel(k: CenteredKernel, m: int, cap: int = DEFAULT_CAP) -> SupportFunction:
    """``Phi_m(x_1..x_m) = E Phi(x_1..x_m, xi_{m+1}..xi_d)``; ``Phi_0 = 0``, ``Phi_d = Phi``."""
    d = k.arity
    if not 0 <= m <= d:
        raise DomainError(f"m must lie in 0..{d}")
    table = _kernel_table(k, cap)
    w = k.dist.probs
    for _ in range(d - m):
        table = table @ w
    return SupportFunction(np.asarray(table, dtype=float), k.dist, name=f"Phi_{m}")


def _projection_from_conditionals(cond: list[np.ndarray], m: int, s: int) -> np.ndarray:
    g = np.zeros((s,) * m)
    for size in range(m + 1):
        sign = -1.0 if (m - size) % 2 else 1.0
        for subset in itertools.combinations(range(m), size):
            shape = [s if i in subset else 1 for i in range(m)]
            g = g + sign * cond[size].reshape(shape)
    return g


def projection(k: CenteredKernel, m: int, cap: int = DEFAULT_CAP) -> SupportFunction:
    """Completely degenerate degree-``m`` Hoeffding projection ``g_m``."""
    if not 1 <= m <= k.arity:
        raise DomainError(f"m must lie in 1..{k.arity}")
    cond = [conditional_kernel(k, j, cap).table for j in range(m + 1)]
    return SupportFunction(_projection_from_conditionals(cond, m, k.dist.size), k.dist, name=f"g_{m}")


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """Projections ``g_1..g_d``, their variances and the rank of the kernel."""

    kernel: CenteredKernel
    projections: tuple[SupportFunction, ...]
    variances: np.ndarray
    rank: int

    @property
    def degree(self) -> int:
        return self.kernel.arity

    def g(self, m: int) -> SupportFunction:
        return self.projections[m - 1]

    def max_degeneracy_error(self) -> float:
        return max(g.degeneracy_error() for g in self.projections)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_spec(),
            "dist": self.kernel.dist.to_spec(),
            "mean": self.kernel.mean,
            "variance": self.kernel.variance,
            "rank": self.rank,
            "support": self.kernel.dist.points.tolist(),
            "projections": [
                {"m": m, "variance": float(v), "table": g.table.tolist()}
                for m, (g, v) in enumerate(zip(self.projections, self.variances), start=1)
            ],
        }


def decompose(k: CenteredKernel, rank_tol: float = RANK_TOL, cap: int = DEFAULT_CAP) -> ProjectionSet:
    """Full Hoeffding decomposition of a centered kernel.

    Raises
    ------
    TrivialKernel
        If ``Var g_m <= rank_tol`` for every ``m``.
    """
    d, s = k.arity, k.dist.size
    table = _kernel_table(k, cap)
    w = k.dist.probs
    cond = [table]
    for _ in range(d):
        cond.append(cond[-1] @ w)
    cond = [np.asarray(c, dtype=float) for c in reversed(cond)]
    gs = tuple(
        SupportFunction(_projection_from_conditionals(cond, m, s), k.dist, name=f"g_{m}")
        for m in range(1, d + 1)
    )
    variances = np.array([g.variance() for g in gs])
    above = np.nonzero(variances > rank_tol)[0]
    if above.size == 0:
        raise TrivialKernel(f"all projections of {k.name} have variance <= {rank_tol}")
    return ProjectionSet(k, gs, variances, int(above[0]) + 1)


def rank(k: CenteredKernel, rank_tol: float = RANK_TOL) -> int:
    return decompose(k, rank_tol).rank


def component_ustat(g: SupportFunction, sample, n: int) -> float:
    """Degree-``m`` component ``U_{n,m}``: the U-statistic with kernel ``g_m``."""
    if n < g.arity:
        raise ArityMismatch(f"n={n} is smaller than the projection degree {g.arity}")
    if not np.any(g.table):
        return 0.0
    return evaluate(g, sample, n).value


def component_martingale(g: SupportFunction, sample, n: int) -> float:
    """``S_m(n) = C(n, m) U_{n,m}``, a martingale in ``n`` for the natural filtration."""
    return math.comb(n, g.arity) * component_ustat(g, sample, n)


def _as_pset(k) -> ProjectionSet:
    return k if isinstance(k, ProjectionSet) else decompose(k)


def reconstruct(k, sample, n: int) -> float:
    """``sum_{m=r}^d C(d, m) U_{n,m}``, which equals ``U(n) - E U(n)``."""
    ps = _as_pset(k)
    d = ps.degree
    return math.fsum(math.comb(d, m) * component_ustat(ps.g(m), sample, n) for m in range(ps.rank, d + 1))


def variance_exact(k, n: int) -> float:
    """``Var U(n) = sum_{m=r}^d C(d,m)^2 C(n,m)^{-1} Var g_m``."""
    ps = _as_pset(k)
    d = ps.degree
    if n < d:
        raise DomainError(f"n={n} must be at least the degree {d}")
    return math.fsum(
        math.comb(d, m) ** 2 / math.comb(n, m) * float(ps.variances[m - 1]) for m in range(ps.rank, d + 1)
    )


def variance_asymptotic(k, n: int) -> float:
    """Leading term ``r! C(d,r)^2 n^{-r} Var g_r`` of :func:`variance_exact`."""
    ps = _as_pset(k)
    r = ps.rank
    return math.factorial(r) * math.comb(ps.degree, r) ** 2 * float(n) ** (-r) * float(ps.variances[r - 1])
