"""Finite-support laws, symmetric kernels and their exact L_p moments.

All moments are computed by enumerating ``support**d`` and summing in log
space, so very high orders (``p`` in the thousands) neither overflow nor
lose the small-probability atoms of a truncated Poisson law.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CapExceeded, DegenerateKernel, DomainError, NonSymmetric

DEFAULT_CAP = 10**7
PROB_TOL = 1e-12
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite-support law of a real random variable.

    Probabilities are stored as logarithms so that atoms with tiny mass
    (``e^{-1}/k!`` for large ``k``) remain representable.

    Attributes
    ----------
    points : ndarray
        Distinct support points, sorted increasingly.
    log_probs : ndarray
        Natural log of the atom probabilities.
    moment_limit : float
        Largest moment order for which this law is an exact stand-in for the
        law it approximates (``inf`` unless the law is a truncation).
    name : str
        Identifier used in reports.
    """

    points: np.ndarray
    log_probs: np.ndarray
    moment_limit: float = math.inf
    name: str = "custom"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        lp = np.asarray(self.log_probs, dtype=float)
        if pts.ndim != 1 or pts.shape != lp.shape:
            raise DomainError("points and log_probs must be 1-D arrays of equal length")
        if pts.size < 2:
            raise DomainError("support size must be at least 2")
        if not np.all(np.isfinite(pts)):
            raise DomainError("support points must be finite")
        if not np.all(np.isfinite(lp)) or np.any(lp > 0.0):
            raise DomainError("every probability must lie in (0, 1]")
        if abs(math.expm1(float(logsumexp(lp)))) > PROB_TOL:
            raise DomainError("probabilities must sum to 1 within 1e-12")
        order = np.argsort(pts, kind="stable")
        pts, lp = pts[order], lp[order]
        if np.any(np.diff(pts) == 0.0):
            raise DomainError("atoms must be distinct")
        pts.setflags(write=False)
        lp.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "log_probs", lp)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]], name: str = "custom") -> "DiscreteDistribution":
        """Build from ``[(point, probability), ...]``."""
        atoms = [tuple(a) for a in atoms]
        if any(len(a) != 2 for a in atoms):
            raise DomainError("atoms must be (point, probability) pairs")
        pts = np.array([a[0] for a in atoms], dtype=float)
        probs = np.array([a[1] for a in atoms], dtype=float)
        if np.any(probs <= 0.0) or np.any(probs > 1.0):
            raise DomainError("every probability must lie in (0, 1]")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise DomainError("probabilities must sum to 1 within 1e-12")
        return cls(pts, np.log(probs), name=name)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def size(self) -> int:
        return int(self.points.size)

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(q)) for x, q in zip(self.points, self.probs)]

    def mean(self) -> float:
        return math.fsum(self.points * self.probs)

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum((self.points - mu) ** 2 * self.probs)

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def index_of(self, values) -> np.ndarray:
        """Map values (which must be support points) to atom indices."""
        values = np.asarray(values, dtype=float)
        idx = np.searchsorted(self.points, values)
        idx = np.clip(idx, 0, self.size - 1)
        if not np.all(self.points[idx] == values):
            raise DomainError("value not in the support of the distribution")
        return idx

    def to_spec(self) -> dict:
        if self.name == "poisson_centered":
            return {"poisson_centered": {"p_max": self.moment_limit}}
        return {"name": self.name, "atoms": [[x, q] for x, q in self.atoms()]}


def rademacher() -> DiscreteDistribution:
    return DiscreteDistribution.from_atoms([(-1.0, 0.5), (1.0, 0.5)], name="rademacher")


def truncated_centered_poisson(p_max: float, tail_tol: float = 1e-15) -> DiscreteDistribution:
    """Centered unit Poisson law ``eta - 1`` truncated at an adaptive cutoff.

    Atoms ``k - 1`` for ``k = 0..K`` carry the renormalized weights
    ``e^{-1}/k!``. ``K`` is the first index past the mode of
    ``|k-1|^{p_max} / k!`` at which a geometric bound on the remaining terms
    is below ``tail_tol`` relative to the running sum, for both the mass and
    the ``p_max``-th absolute moment.

    Parameters
    ----------
    p_max : float
        Highest moment order that must be reproduced (``>= 1``).
    tail_tol : float
        Relative truncation tolerance.
    """
    if not p_max >= 1.0:
        raise DomainError("p_max must be >= 1")
    if not tail_tol > 0.0:
        raise DomainError("tail_tol must be positive")
    log_tol = math.log(tail_tol)
    log_w: list[float] = []
    mass = -math.inf
    moment = -math.inf
    k = 0
    while True:
        lw = -1.0 - math.lgamma(k + 1)
        log_w.append(lw)
        mass = np.logaddexp(mass, lw)
        lt = lw + p_max * math.log(abs(k - 1)) if k != 1 else -math.inf
        moment = np.logaddexp(moment, lt)
        if k >= 2:
            # ratios of successive terms; both decrease in k for k >= 2
            log_r_moment = p_max * math.log(k / (k - 1)) - math.log(k + 1)
            log_r_mass = -math.log(k + 1)
            if log_r_moment < 0.0:
                tail_m = lt + log_r_moment - math.log1p(-math.exp(log_r_moment))
                tail_0 = lw + log_r_mass - math.log1p(-math.exp(log_r_mass))
                if tail_m - moment < log_tol and tail_0 - mass < log_tol:
                    break
        k += 1
    lw_arr = np.array(log_w)
    pts = np.arange(len(log_w), dtype=float) - 1.0
    return DiscreteDistribution(pts, lw_arr - logsumexp(lw_arr), moment_limit=float(p_max), name="poisson_centered")


def sample_indices(dist: DiscreteDistribution, n: int, seed: int) -> np.ndarray:
    """Atom indices of ``n`` i.i.d. draws; inverse CDF on ``default_rng(seed)`` uniforms."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 <= int(seed) < 2**64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    u = np.random.default_rng(int(seed)).random(n)
    idx = np.searchsorted(dist.cdf(), u, side="right")
    return np.minimum(idx, dist.size - 1)


def sample_iid(dist: DiscreteDistribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. values from ``dist``; bit-identical for equal ``(seed, n)``."""
    return dist.points[sample_indices(dist, n, seed)]


# --------------------------------------------------------------------------
# kernels


def _identity(x):
    return np.asarray(x, dtype=float)


def _sum(*xs):
    return np.sum(np.broadcast_arrays(*xs), axis=0, dtype=float)


def _product(*xs):
    return np.prod(np.broadcast_arrays(*xs), axis=0, dtype=float)


def _sample_variance(x, y):
    return 0.5 * (np.asarray(x, dtype=float) - y) ** 2


def _sign(*xs):
    return np.sign(_sum(*xs))


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric function of ``arity`` real arguments.

    ``func`` must be vectorized: called with ``arity`` broadcastable arrays it
    returns an array of kernel values.
    """

    arity: int
    func: Callable[..., np.ndarray]
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise DomainError("kernel arity must be >= 1")

    def __call__(self, *xs) -> np.ndarray:
        if len(xs) != self.arity:
            raise DomainError(f"kernel {self.name} takes {self.arity} arguments")
        return np.asarray(self.func(*xs), dtype=float)

    def evaluate_rows(self, rows: np.ndarray) -> np.ndarray:
        """Evaluate on each row of an ``(N, arity)`` array."""
        rows = np.asarray(rows, dtype=float)
        return np.broadcast_to(self(*rows.T), rows.shape[:1]).astype(float)

    def to_spec(self) -> dict:
        return {"name": self.name, "arity": self.arity}


BUILTIN_KERNELS = ("identity", "sum", "product", "sample_variance", "sign")


def builtin_kernel(name: str, arity: int | None = None) -> Kernel:
    """Look up a catalog kernel.

    ``identity`` has arity 1 and ``sample_variance`` arity 2; ``sum``,
    ``product`` and ``sign`` (of the sum) accept any arity, default 2.
    """
    fixed = {"identity": (1, _identity), "sample_variance": (2, _sample_variance)}
    free = {"sum": _sum, "product": _product, "sign": _sign}
    if name in fixed:
        d, f = fixed[name]
        if arity is not None and arity != d:
            raise DomainError(f"kernel {name!r} has fixed arity {d}")
        return Kernel(d, f, name)
    if name in free:
        return Kernel(2 if arity is None else int(arity), free[name], name)
    raise DomainError(f"unknown kernel {name!r}; expected one of {BUILTIN_KERNELS}")


@dataclass(frozen=True, eq=False)
class CenteredKernel:
    """``base - mean`` under an attached distribution, with its variance."""

    base: Kernel
    dist: DiscreteDistribution
    mean: float
    variance: float

    @property
    def arity(self) -> int:
        return self.base.arity

    @property
    def name(self) -> str:
        return self.base.name

    def __call__(self, *xs) -> np.ndarray:
        return self.base(*xs) - self.mean

    def evaluate_rows(self, rows: np.ndarray) -> np.ndarray:
        return self.base.evaluate_rows(rows) - self.mean

    def to_spec(self) -> dict:
        return self.base.to_spec()


def _check_cap(size: int, d: int, cap: int) -> None:
    if size**d > cap:
        raise CapExceeded(f"support**d = {size}**{d} exceeds the cap of {cap} terms")


def support_table(k, dist: DiscreteDistribution, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Kernel values on ``support**d`` as an array of shape ``(s,)*d``."""
    d, s = k.arity, dist.size
    _check_cap(s, d, cap)
    grids = np.meshgrid(*([dist.points] * d), indexing="ij")
    return np.broadcast_to(k(*grids), (s,) * d).astype(float)


def log_weight_table(dist: DiscreteDistribution, d: int) -> np.ndarray:
    """Log product probabilities on ``support**d``, shape ``(s,)*d``."""
    out = np.zeros((1,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = dist.size
        out = out + dist.log_probs.reshape(shape)
    return out


def check_symmetric(k, dist: DiscreteDistribution, atol: float = 1e-12, cap: int = DEFAULT_CAP) -> None:
    """Exhaustive permutation check on support tuples; raises :class:`NonSymmetric`."""
    table = support_table(k, dist, cap)
    for perm in itertools.permutations(range(k.arity)):
        if not np.allclose(table, np.transpose(table, perm), rtol=0.0, atol=atol):
            raise NonSymmetric(f"kernel {k.name} is not symmetric under permutation {perm}")


class LpMoments:
    """Exact ``p -> |Phi(xi_1..xi_d)|_p`` for a kernel under a finite law.

    Precomputes log-values and log-weights once so a whole p-grid is cheap.
    """

    def __init__(self, k, dist: DiscreteDistribution, cap: int = DEFAULT_CAP, strict: bool = False):
        if strict:
            check_symmetric(k, dist, cap=cap)
        table = support_table(k, dist, cap).ravel()
        log_w = log_weight_table(dist, k.arity).ravel()
        keep = table != 0.0
        self._log_abs = np.log(np.abs(table[keep]))
        self._log_w = log_w[keep]
        self.max_abs = float(np.max(np.abs(table)))
        self.moment_limit = dist.moment_limit

    def log_moment(self, p: float) -> float:
        """``log E|Phi|^p``."""
        if self._log_abs.size == 0:
            return -math.inf
        return float(logsumexp(p * self._log_abs + self._log_w))

    def __call__(self, p):
        if np.ndim(p) == 0:
            if not p >= 1.0:
                raise DomainError("moment order p must be >= 1")
            return math.exp(self.log_moment(float(p)) / p)
        return np.array([self(float(q)) for q in np.asarray(p, dtype=float)])


def kernel_lp_norm(k, dist: DiscreteDistribution, p: float, cap: int = DEFAULT_CAP, strict: bool = False) -> float:
    """``(E|Phi(xi_1, ..., xi_d)|^p)^{1/p}`` by exhaustive enumeration.

    Raises
    ------
    CapExceeded
        If ``support**d`` exceeds ``cap`` terms.
    NonSymmetric
        In ``strict`` mode when the kernel fails the permutation check.
    """
    if not p >= 1.0:
        raise DomainError("moment order p must be >= 1")
    return LpMoments(k, dist, cap=cap, strict=strict)(p)


def kernel_expectation(k, dist: DiscreteDistribution, cap: int = DEFAULT_CAP) -> float:
    table = support_table(k, dist, cap)
    w = np.exp(log_weight_table(dist, k.arity))
    return math.fsum((table * w).ravel())


def center(k: Kernel, dist: DiscreteDistribution, cap: int = DEFAULT_CAP) -> CenteredKernel:
    """Subtract ``E Phi`` and record ``Var Phi``.

    Raises
    ------
    DegenerateKernel
        If ``Var Phi <= 1e-12``.
    """
    table = support_table(k, dist, cap)
    w = np.exp(log_weight_table(dist, k.arity))
    mean = math.fsum((table * w).ravel())
    var = math.fsum(((table - mean) ** 2 * w).ravel())
    if var <= DEGENERACY_TOL:
        raise DegenerateKernel(f"kernel {k.name} has variance {var:.3g} under {dist.name}")
    return CenteredKernel(k, dist, mean, var)


def centered_poisson_norm(p: float, tail_tol: float = 1e-15) -> float:
    """Exact ``|eta - 1|_p`` for unit Poisson ``eta`` (series truncated at ``tail_tol``)."""
    if not p >= 1.0:
        raise DomainError("p must be >= 1")
    dist = truncated_centered_poisson(p, tail_tol)
    return LpMoments(builtin_kernel("identity"), dist)(p)


def poisson_norm_growth(p: float) -> float:
    """``|eta - 1|_p`` divided by its asymptotic equivalent ``p / (e ln p)``."""
    if not p >= 2.0:
        raise DomainError("p must be >= 2")
    return centered_poisson_norm(p) / (p / (math.e * math.log(p)))


def dist_from_spec(spec: dict) -> DiscreteDistribution:
    """Build a distribution from its JSON config form."""
    if "atoms" in spec:
        return DiscreteDistribution.from_atoms(spec["atoms"], name=spec.get("name", "custom"))
    if "poisson_centered" in spec:
        opts = spec["poisson_centered"]
        return truncated_centered_poisson(opts["p_max"], opts.get("tail_tol", 1e-15))
    raise DomainError("dist spec needs 'atoms' or 'poisson_centered'")


def kernel_from_spec(spec: dict) -> Kernel:
    return builtin_kernel(spec["name"], spec.get("arity"))


def kernel_tail(k, dist: DiscreteDistribution, x, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact ``max(P(Phi > x), P(Phi < -x))`` under the product law."""
    vals = support_table(k, dist, cap).ravel()
    w = np.exp(log_weight_table(dist, k.arity)).ravel()
    order = np.argsort(vals, kind="stable")
    vals, cum = vals[order], np.concatenate([[0.0], np.cumsum(w[order])])
    x = np.asarray(x, dtype=float)
    upper = 1.0 - cum[np.searchsorted(vals, x, side="right")]
    lower = cum[np.searchsorted(vals, -x, side="left")]
    return np.clip(np.maximum(upper, lower), 0.0, 1.0)
