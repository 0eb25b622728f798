"""Seeded simulation of the normalized U-statistic and bound verification.

Replication ``j`` at sample size ``n`` draws its sample from a seed derived
from ``(master_seed, n, j)`` alone, and the statistic is a function of atom
counts, so the draw matrix does not depend on how replications are split
across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .errors import ConfigError, DegenerateVariance
from .gls import P_MIN, moment_markov_envelope, natural_psi, tail_envelope, uniform_bound
from .hoeffding import ProjectionSet, decompose, variance_exact
from .model import DiscreteDistribution, Kernel, LpMoments, center, sample_indices
from .ustat import CountEvaluator

SE_SLACK = 3.0
CHUNK = 4096
DEFAULT_PS = (2.0, 3.0, 4.0, 6.0)
DEFAULT_X_GRID = tuple(float(x) for x in np.round(np.arange(0.0, 8.01, 0.25), 2))


@dataclass(frozen=True, eq=False)
class SimulationPlan:
    kernel: Kernel
    dist: DiscreteDistribution
    ns: tuple[int, ...]
    replications: int = 10_000
    ps: tuple[float, ...] = DEFAULT_PS
    x_grid: tuple[float, ...] = DEFAULT_X_GRID
    seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 100:
            raise ConfigError("replications must be at least 100")
        if not self.ns or any(n < self.kernel.arity for n in self.ns):
            raise ConfigError(f"every n must be at least the kernel arity {self.kernel.arity}")
        if any(p < P_MIN for p in self.ps):
            raise ConfigError("moment orders must be >= 2")
        if any(p > self.dist.moment_limit for p in self.ps):
            raise ConfigError(f"moment orders exceed the law's moment limit {self.dist.moment_limit}")
        if list(self.x_grid) != sorted(self.x_grid):
            raise ConfigError("x_grid must be increasing")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_spec(),
            "dist": self.dist.to_spec(),
            "ns": list(self.ns),
            "replications": self.replications,
            "ps": list(self.ps),
            "x_grid": list(self.x_grid),
            "seed": self.seed,
        }


def replication_seed(master_seed: int, n: int, j: int) -> int:
    """64-bit seed for replication ``j`` at sample size ``n``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(n, j))
    return int(ss.generate_state(1, np.uint64)[0])


def _count_block(dist: DiscreteDistribution, n: int, master_seed: int, j0: int, j1: int) -> np.ndarray:
    out = np.empty((j1 - j0, dist.size), dtype=np.int64)
    for row, j in enumerate(range(j0, j1)):
        out[row] = np.bincount(sample_indices(dist, n, replication_seed(master_seed, n, j)), minlength=dist.size)
    return out


def sample_counts(dist: DiscreteDistribution, n: int, replications: int, master_seed: int,
                  workers: int = 1) -> np.ndarray:
    """Atom counts of every replication, shape ``(replications, support size)``."""
    blocks = [(j, min(j + CHUNK, replications)) for j in range(0, replications, CHUNK)]
    if workers <= 1:
        parts = [_count_block(dist, n, master_seed, a, b) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_count_block, dist, n, master_seed, a, b) for a, b in blocks]
            parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class SimulationDraws:
    ns: tuple[int, ...]
    draws: np.ndarray  # (len(ns), replications) of (U(n) - E U(n)) / sigma(n)
    sigmas: tuple[float, ...]
    projections: ProjectionSet


def simulate(plan: SimulationPlan, workers: int = 1) -> SimulationDraws:
    """Draw ``R`` replications of ``(U(n) - E U(n)) / sigma(n)`` for each ``n`` in the plan."""
    pset = decompose(center(plan.kernel, plan.dist))
    evaluator = CountEvaluator(pset.kernel, plan.dist)
    rows, sigmas = [], []
    for n in plan.ns:
        sigma = math.sqrt(variance_exact(pset, n))
        if not sigma > 0.0:
            raise DegenerateVariance(f"Var U({n}) is zero")
        counts = sample_counts(plan.dist, n, plan.replications, plan.seed, workers)
        rows.append(evaluator(counts) / sigma)
        sigmas.append(sigma)
    return SimulationDraws(tuple(plan.ns), np.vstack(rows), tuple(sigmas), pset)


def empirical_moment(draws: np.ndarray, p: float) -> tuple[float, float]:
    """``(mean |draw|^p)^{1/p}`` and its delta-method standard error."""
    a = np.abs(np.asarray(draws, dtype=float)) ** p
    r = a.size
    m = float(np.mean(a))
    if m == 0.0:
        return 0.0, 0.0
    se_m = float(np.std(a, ddof=1)) / math.sqrt(r)
    return m ** (1.0 / p), m ** (1.0 / p - 1.0) * se_m / p


@dataclass(frozen=True)
class EmpiricalTail:
    x: np.ndarray
    tail: np.ndarray
    se: np.ndarray


def empirical_tail(draws: np.ndarray, x_grid) -> EmpiricalTail:
    """``max(P(eta > x), P(eta < -x))`` per grid point, with binomial SE."""
    d = np.sort(np.asarray(draws, dtype=float))
    x = np.asarray(x_grid, dtype=float)
    r = d.size
    upper = (r - np.searchsorted(d, x, side="right")) / r
    lower = np.searchsorted(d, -x, side="left") / r
    t = np.maximum(upper, lower)
    return EmpiricalTail(x, t, np.sqrt(t * (1.0 - t) / r))


@dataclass
class SimulationReport:
    plan: dict
    rank: int
    degree: int
    uniform_bound: dict
    per_n: list[dict] = field(default_factory=list)
    sup_over_n: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "plan": self.plan,
            "rank": self.rank,
            "degree": self.degree,
            "uniform_bound": self.uniform_bound,
            "per_n": self.per_n,
            "sup_over_n": self.sup_over_n,
            "checks": self.checks,
        }


def _markov_orders(b: float) -> np.ndarray:
    return np.unique(np.concatenate([np.geomspace(P_MIN, min(b, 64.0), 48), [min(b, 64.0)]]))


def build_report(plan: SimulationPlan, sim: SimulationDraws) -> SimulationReport:
    """Attach every theoretical bound to the empirical moments and tails."""
    pset = sim.projections
    kern = pset.kernel
    d, r = pset.degree, pset.rank
    lp = LpMoments(kern, kern.dist)
    psi = natural_psi(kern)
    ub, psi_d = uniform_bound(pset, psi)
    env_u = tail_envelope(psi_d, ub.bound)
    x = np.asarray(plan.x_grid, dtype=float)
    env_u_vals = env_u(x)
    orders = _markov_orders(kern.dist.moment_limit)

    per_n = []
    for i, n in enumerate(sim.ns):
        row = sim.draws[i]
        sigma = sim.sigmas[i]
        moments = []
        for p in plan.ps:
            est, se = empirical_moment(row, p)
            nb = bounds.moment_bound_normalized(bounds.BoundInput(d, r, n, p, lp(p)), sigma)
            moments.append({"p": p, "estimate": est, "se": se, "bound": nb.value, "c_eff": nb.c_eff,
                            "slack": nb.value / est if est > 0 else math.inf})
        est2, se2 = empirical_moment(row, 2.0)

        def log_bound(p: float, n=n, sigma=sigma) -> float:
            return p * math.log(bounds.moment_bound_normalized(bounds.BoundInput(d, r, n, p, lp(p)), sigma).value)

        markov = moment_markov_envelope(log_bound, orders)(x)
        tail = empirical_tail(row, x)
        gls_ratios = [(m["estimate"] / float(psi_d(m["p"])), m["se"] / float(psi_d(m["p"]))) for m in moments]
        g_est, g_se = max(gls_ratios)
        per_n.append({
            "n": n,
            "sigma": sigma,
            "second_moment": {"estimate": est2, "se": se2},
            "moments": moments,
            "tails": [
                {"x": float(xv), "tail": float(t), "se": float(s), "envelope_uniform": float(eu),
                 "envelope_markov": float(em), "resolved": bool(t >= 10.0 / plan.replications)}
                for xv, t, s, eu, em in zip(x, tail.tail, tail.se, env_u_vals, markov)
            ],
            "gls_norm": {"estimate": g_est, "se": g_se},
        })

    sup_moments = {str(p): max(e["moments"][k]["estimate"] for e in per_n) for k, p in enumerate(plan.ps)}
    sup_tails = {str(float(xv)): max(e["tails"][k]["tail"] for e in per_n) for k, xv in enumerate(x)}
    checks = {
        "second_moment_within_3se": all(abs(e["second_moment"]["estimate"] - 1.0) <= SE_SLACK * e["second_moment"]["se"]
                                        for e in per_n),
        "tails_nonincreasing": all(
            all(a["tail"] >= b["tail"] for a, b in zip(e["tails"], e["tails"][1:])) for e in per_n
        ),
    }
    uniform = {"constant": ub.constant, "phi_norm": ub.phi_norm, "bound": ub.bound, "n_max": ub.n_max,
               "envelope_threshold": math.e * ub.bound}
    return SimulationReport(plan.to_dict(), r, d, uniform, per_n,
                            {"moments": sup_moments, "tails": sup_tails}, checks)


@dataclass(frozen=True)
class Verdict:
    kind: str
    n: int
    at: float | None  # p for moments, x for tails
    empirical: float
    se: float
    theoretical: float
    passed: bool

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "at": self.at, "empirical": self.empirical, "se": self.se,
                "theoretical": self.theoretical, "verdict": "PASS" if self.passed else "FAIL"}


def _verdict(kind: str, n: int, at, emp: float, se: float, theo: float, scale: float) -> Verdict:
    t = scale * theo
    return Verdict(kind, n, at, emp, se, t, bool(emp <= t + SE_SLACK * se))


def verify(report: SimulationReport | dict, scale: float = 1.0) -> list[Verdict]:
    """Compare every empirical quantity with its theoretical ceiling.

    ``PASS`` when ``empirical <= scale * theoretical + 3 SE``. Besides the
    moment and tail bounds this includes the exact identity
    ``|U(n)/sigma(n)|_2 = 1``, so a ``scale`` below one must produce failures.
    """
    rep = report.to_dict() if isinstance(report, SimulationReport) else report
    bound_u = rep["uniform_bound"]["bound"]
    out: list[Verdict] = []
    for e in rep["per_n"]:
        n = e["n"]
        sm = e["second_moment"]
        out.append(_verdict("normalization", n, 2.0, sm["estimate"], sm["se"], 1.0, scale))
        for m in e["moments"]:
            out.append(_verdict("moment_bound", n, m["p"], m["estimate"], m["se"], m["bound"], scale))
        out.append(_verdict("gls_norm", n, None, e["gls_norm"]["estimate"], e["gls_norm"]["se"], bound_u, scale))
        for t in e["tails"]:
            out.append(_verdict("tail_uniform", n, t["x"], t["tail"], t["se"], t["envelope_uniform"], scale))
            out.append(_verdict("tail_markov", n, t["x"], t["tail"], t["se"], t["envelope_markov"], scale))
    return out
