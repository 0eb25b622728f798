"""U-statistic evaluation: direct, streaming, count-based and brute-force exact."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ArityMismatch, CapExceeded, DomainError, NotReady, SampleTooShort
from .model import DEFAULT_CAP, CenteredKernel, DiscreteDistribution, kernel_expectation

CHUNK = 1 << 15


class IndexSet:
    """Strictly increasing ``d``-tuples from ``{1..n}``, in lexicographic order."""

    def __init__(self, d: int, n: int):
        if d < 1 or n < d:
            raise DomainError(f"need 1 <= d <= n, got d={d}, n={n}")
        self.d = d
        self.n = n

    def __len__(self) -> int:
        return math.comb(self.n, self.d)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return itertools.combinations(range(1, self.n + 1), self.d)

    def chunks(self, size: int = CHUNK) -> Iterator[np.ndarray]:
        """Zero-based index blocks of shape ``(<=size, d)``."""
        it = itertools.combinations(range(self.n), self.d)
        while True:
            block = list(itertools.islice(it, size))
            if not block:
                return
            yield np.array(block, dtype=np.intp)


@dataclass(frozen=True)
class UStatValue:
    n: int
    value: float
    centered_value: float | None
    n_terms: int


def _split_kernel(k):
    if isinstance(k, CenteredKernel):
        return k.base, k.mean
    return k, None


def evaluate(k, sample, n: int | None = None, dist: DiscreteDistribution | None = None,
             cap: int = DEFAULT_CAP) -> UStatValue:
    """Average of the kernel over all increasing index tuples of the first ``n`` points.

    ``E U(n) = E Phi`` is taken from a :class:`CenteredKernel` or computed from
    ``dist``; without either, ``centered_value`` is ``None``. ``n = d`` is
    accepted and gives the single-term statistic.
    """
    base, mean = _split_kernel(k)
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 1:
        raise ArityMismatch("sample must be one-dimensional")
    n = sample.size if n is None else int(n)
    d = base.arity
    if sample.size < n:
        raise SampleTooShort(f"sample has {sample.size} points, n={n}")
    if n < d:
        raise ArityMismatch(f"n={n} is smaller than the kernel arity {d}")
    total = math.comb(n, d)
    if total > cap:
        raise CapExceeded(f"C({n},{d}) = {total} exceeds the cap of {cap} terms")
    x = sample[:n]
    visited = 0
    parts: list[np.ndarray] = []
    for idx in IndexSet(d, n).chunks():
        parts.append(base.evaluate_rows(x[idx]))
        visited += idx.shape[0]
    value = math.fsum(itertools.chain.from_iterable(parts)) / total
    if mean is None and dist is not None:
        mean = kernel_expectation(base, dist, cap)
    centered = None if mean is None else value - mean
    return UStatValue(n, value, centered, visited)


class IncrementalUStat:
    """Streaming U-statistic.

    Each new point is combined with every ``(d-1)``-subset of the earlier
    points, so a point costs ``C(n-1, d-1)`` kernel calls.
    """

    def __init__(self, k, dist: DiscreteDistribution | None = None):
        self.kernel, self.mean = _split_kernel(k)
        if self.mean is None and dist is not None:
            self.mean = kernel_expectation(self.kernel, dist)
        self.points: list[float] = []
        self._sum = 0.0
        self.n_terms = 0

    @property
    def n(self) -> int:
        return len(self.points)

    def update(self, x: float) -> "IncrementalUStat":
        d = self.kernel.arity
        prev = np.asarray(self.points, dtype=float)
        if len(prev) >= d - 1:
            if d == 1:
                new = [float(self.kernel(np.array([x]))[0])]
            else:
                new = []
                for idx in IndexSet(d - 1, len(prev)).chunks():
                    rows = np.column_stack([prev[idx], np.full(idx.shape[0], float(x))])
                    new.extend(self.kernel.evaluate_rows(rows).tolist())
            self._sum = math.fsum([self._sum, *new])
            self.n_terms += len(new)
        self.points.append(float(x))
        return self

    @property
    def value(self) -> float:
        d = self.kernel.arity
        if self.n < d:
            raise NotReady(f"{self.n} points seen, kernel arity {d}")
        return self._sum / math.comb(self.n, d)

    def result(self) -> UStatValue:
        v = self.value
        return UStatValue(self.n, v, None if self.mean is None else v - self.mean, self.n_terms)


def incremental_update(state: IncrementalUStat, new_point: float) -> IncrementalUStat:
    return state.update(new_point)


def _outcomes(dist: DiscreteDistribution, n: int, cap: int) -> np.ndarray:
    if dist.size**n > cap:
        raise CapExceeded(f"support**n = {dist.size}**{n} exceeds the cap of {cap} outcomes")
    return np.array(list(itertools.product(range(dist.size), repeat=n)), dtype=np.intp).reshape(-1, n)


def brute_force_distribution(k, dist: DiscreteDistribution, n: int,
                             cap: int = DEFAULT_CAP) -> list[tuple[float, float]]:
    """Exact law of ``U(n)`` by enumerating all ``support**n`` samples.

    Each outcome's statistic is a correctly rounded sum, so outcomes with the
    same multiset of values collapse onto the same float key.
    """
    base, _ = _split_kernel(k)
    d = base.arity
    if n < d:
        raise ArityMismatch(f"n={n} is smaller than the kernel arity {d}")
    outcomes = _outcomes(dist, n, cap)
    x = dist.points[outcomes]
    log_p = dist.log_probs[outcomes].sum(axis=1)
    combos = np.array(list(itertools.combinations(range(n), d)), dtype=np.intp)
    terms = np.stack([base(*x[:, c].T) for c in combos], axis=1)
    total = math.comb(n, d)
    law: dict[float, list[float]] = {}
    for row, lp in zip(terms, log_p):
        law.setdefault(math.fsum(row) / total, []).append(math.exp(lp))
    return sorted((u, math.fsum(ps)) for u, ps in law.items())


def brute_force_moment(k, dist: DiscreteDistribution, n: int, p: float, cap: int = DEFAULT_CAP) -> float:
    """Exact ``E|U(n) - E U(n)|^p`` from the enumerated law."""
    base, mean = _split_kernel(k)
    if mean is None:
        mean = kernel_expectation(base, dist, cap)
    law = brute_force_distribution(base, dist, n, cap)
    return math.fsum(q * abs(u - mean) ** p for u, q in law)


def _binom_column(c: np.ndarray, j: int) -> np.ndarray:
    """Elementwise ``C(c, j)``; exact in floating point for the small ``j`` used here."""
    out = np.ones(c.shape)
    for i in range(j):
        out = out * (c - i)
    return out / math.factorial(j)


class CountEvaluator:
    """``U(n)`` as a function of atom counts for a finite-support law.

    A U-statistic is a symmetric function of the sample, so it depends only on
    how many times each atom occurs:
    ``U = sum_K Phi(K) prod_i C(c_i, K_i) / C(n, d)`` over multisets ``K`` of
    size ``d``.
    """

    def __init__(self, k, dist: DiscreteDistribution):
        base, mean = _split_kernel(k)
        self.arity = base.arity
        self.size = dist.size
        ms = np.array(list(itertools.combinations_with_replacement(range(dist.size), self.arity)), dtype=np.intp)
        self.values = base.evaluate_rows(dist.points[ms])
        if mean is not None:
            self.values = self.values - mean
        # (atom, multiplicity) pairs for each multiset
        self.groups = [tuple((int(a), int(c)) for a, c in zip(*np.unique(row, return_counts=True))) for row in ms]

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        counts = np.atleast_2d(np.asarray(counts))
        n = int(counts[0].sum())
        if n < self.arity:
            raise ArityMismatch(f"n={n} is smaller than the kernel arity {self.arity}")
        present = counts.sum(axis=0) > 0
        binom = [_binom_column(counts, j) for j in range(self.arity + 1)]
        out = np.zeros(counts.shape[0])
        for value, group in zip(self.values, self.groups):
            if value == 0.0 or not all(present[a] for a, _ in group):
                continue
            w = binom[group[0][1]][:, group[0][0]]
            for a, c in group[1:]:
                w = w * binom[c][:, a]
            out += value * w
        return out / math.comb(n, self.arity)


def count_distribution(k, dist: DiscreteDistribution, n: int,
                       max_states: int = 2_000_000) -> list[tuple[float, float]]:
    """Exact law of ``U(n)`` via multinomial enumeration of atom counts.

    Scales to much larger ``n`` than :func:`brute_force_distribution` since
    only ``C(n+s-1, s-1)`` count vectors exist.
    """
    s = dist.size
    n_states = math.comb(n + s - 1, s - 1)
    if n_states > max_states:
        raise CapExceeded(f"{n_states} count vectors exceed the cap of {max_states}")
    counts = np.array([np.diff((-1, *bars, n + s - 1)) - 1
                       for bars in itertools.combinations(range(n + s - 1), s - 1)], dtype=np.int64)
    log_coef = (math.lgamma(n + 1) - np.sum([[math.lgamma(c + 1) for c in row] for row in counts], axis=1)
                + counts @ dist.log_probs)
    values = CountEvaluator(k, dist)(counts)
    law: dict[float, list[float]] = {}
    for u, lp in zip(values, log_coef):
        law.setdefault(float(u), []).append(math.exp(lp))
    return sorted((u, math.fsum(ps)) for u, ps in law.items())
