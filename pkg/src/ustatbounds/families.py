"""Exact exponent algebra for moment/tail families.

Two families are covered, with all exponents as :class:`fractions.Fraction`:

* power-log: ``|xi|_p <= C p^{1/m} (ln p)^r``  <->  ``T(x) <= exp(-C' x^m (ln x)^{-m r})``;
* exp-beta: ``|xi|_p <= exp(C p^beta)``  <->  ``T(x) <= exp(-C' (ln(1 + x))^{1 + 1/beta})``.

Passing a kernel of degree ``d`` multiplies moments by ``(p / ln p)^d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from .errors import ParamError

Number = Union[int, Fraction, str]


def _frac(v: Number, name: str) -> Fraction:
    try:
        return Fraction(v)
    except (TypeError, ValueError) as exc:
        raise ParamError(f"{name} must be rational, got {v!r}") from exc


@dataclass(frozen=True)
class PowerLogFamily:
    """Moments ``p^{1/m} (ln p)^r``; tails ``exp(-C x^m (ln x)^{-m r})``."""

    m: Fraction
    r: Fraction

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise ParamError("m must be positive")

    @property
    def moment_exponents(self) -> tuple[Fraction, Fraction]:
        """``(power of p, power of ln p)``."""
        return 1 / self.m, self.r

    @property
    def tail_exponents(self) -> tuple[Fraction, Fraction]:
        """``(power of x, power of ln x)`` inside the exponent."""
        return self.m, -self.m * self.r

    @classmethod
    def from_tail(cls, power: Number, log_power: Number) -> "PowerLogFamily":
        m = _frac(power, "power")
        if m <= 0:
            raise ParamError("tail power must be positive")
        return cls(m, -_frac(log_power, "log_power") / m)

    def ustat(self, d: int) -> "PowerLogFamily":
        """Family of the normalized U-statistic of a degree-``d`` kernel.

        Moments become ``p^{d + 1/m} (ln p)^{r - d}``, i.e.
        ``m' = m / (1 + d m)`` and ``r' = r - d``.
        """
        if d < 0:
            raise ParamError("d must be >= 0")
        return PowerLogFamily(self.m / (1 + d * self.m), self.r - d)

    def tail(self, c: float) -> Callable[[np.ndarray], np.ndarray]:
        """``x -> exp(-c x^m (ln x)^{-m r})`` for ``x > e`` (1 below)."""
        a, b = float(self.tail_exponents[0]), float(self.tail_exponents[1])

        def f(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.exp(-c * x**a * np.log(x) ** b)
            return np.where(x > math.e, v, 1.0)

        return f

    def moments(self, c: float) -> Callable[[float], float]:
        return lambda p: c * p ** float(1 / self.m) * math.log(p) ** float(self.r)


@dataclass(frozen=True)
class ExpBetaFamily:
    """Moments ``exp(C p^beta)``; tails ``exp(-C (ln(1 + x))^{1 + 1/beta})``."""

    beta: Fraction

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ParamError("beta must be positive")

    @property
    def log_power(self) -> Fraction:
        return 1 + 1 / self.beta

    @classmethod
    def from_tail(cls, log_power: Number) -> "ExpBetaFamily":
        q = _frac(log_power, "log_power")
        if q <= 1:
            raise ParamError("tail log-power must exceed 1")
        return cls(1 / (q - 1))

    def ustat(self, d: int) -> "ExpBetaFamily":
        """``(p/ln p)^d exp(C p^beta) <= exp(C' p^beta)``: beta is unchanged."""
        if d < 0:
            raise ParamError("d must be >= 0")
        return self

    def tail(self, c: float) -> Callable[[np.ndarray], np.ndarray]:
        q = float(self.log_power)
        return lambda x: np.exp(-c * np.log1p(np.asarray(x, dtype=float)) ** q)

    def moments(self, c: float) -> Callable[[float], float]:
        return lambda p: math.exp(c * p ** float(self.beta))


FAMILIES = ("power-log", "exp-beta")
DIRECTIONS = ("moments->tail", "tail->moments")


def example_tail_families(kind: str, params: dict, direction: str = "moments->tail", d: int = 0) -> dict:
    """Convert between moment and tail exponents, optionally through a degree-``d`` U-statistic.

    Parameters
    ----------
    kind : {"power-log", "exp-beta"}
    params : dict
        ``power-log`` moments: ``m``, ``r``; tails: ``power``, ``log_power``.
        ``exp-beta`` moments: ``beta``; tails: ``log_power``.
    direction : {"moments->tail", "tail->moments"}
    d : int
        Kernel degree; ``0`` leaves the family unchanged.

    Returns
    -------
    dict
        The (possibly transformed) family and its exponents as Fractions.
    """
    if direction not in DIRECTIONS:
        raise ParamError(f"direction must be one of {DIRECTIONS}")
    if kind == "power-log":
        if direction == "moments->tail":
            fam = PowerLogFamily(_frac(params["m"], "m"), _frac(params.get("r", 0), "r"))
        else:
            fam = PowerLogFamily.from_tail(params["power"], params.get("log_power", 0))
        fam = fam.ustat(d)
        return {
            "family": fam,
            "moment_power": fam.moment_exponents[0],
            "moment_log_power": fam.moment_exponents[1],
            "tail_power": fam.tail_exponents[0],
            "tail_log_power": fam.tail_exponents[1],
        }
    if kind == "exp-beta":
        if direction == "moments->tail":
            fam = ExpBetaFamily(_frac(params["beta"], "beta"))
        else:
            fam = ExpBetaFamily.from_tail(params["log_power"])
        fam = fam.ustat(d)
        return {"family": fam, "beta": fam.beta, "tail_log_power": fam.log_power}
    raise ParamError(f"kind must be one of {FAMILIES}")
