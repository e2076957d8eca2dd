"""Temporal weight schemes for the streaming objective.

Two schemes are supported: uniform (every past sample weighted 1/t) and
exponentially discounted (weight proportional to gamma**(t - i), normalized
to the simplex).  Both admit an exact two-term recursion when moving from
horizon t to t + 1; the recursion coefficients here are what the streaming
accumulators consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "WeightScheme",
    "uniform_scheme",
    "discounted_scheme",
    "weights",
    "recursion_coefficients",
    "GammaPowerTracker",
]

# Incremental gamma**t carries ~1 ulp of error per multiply; re-anchoring by
# direct exponentiation this often keeps long runs bit-stable.
_REANCHOR_PERIOD = 1000


@dataclass(frozen=True)
class WeightScheme:
    """Temporal weighting rule: ``kind`` is 'uniform' or 'discounted'."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if self.gamma is not None:
                raise ParameterError("uniform scheme takes no gamma")
        elif self.kind == "discounted":
            if self.gamma is None or not (0.0 < self.gamma < 1.0):
                raise ParameterError(f"discounted scheme needs gamma in (0, 1), got {self.gamma}")
        else:
            raise ParameterError(f"unknown scheme kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return f"discounted(gamma={self.gamma:g})"


def uniform_scheme() -> WeightScheme:
    return WeightScheme(kind="uniform")


def discounted_scheme(gamma: float) -> WeightScheme:
    return WeightScheme(kind="discounted", gamma=gamma)


def weights(scheme: WeightScheme, t: int) -> np.ndarray:
    """Weight vector (a_1(t), ..., a_t(t)) on the probability simplex.

    Uniform: every entry 1/t.  Discounted: entry i is
    (1 - gamma) * gamma**(t - i) / (1 - gamma**t).
    """
    if t < 1:
        raise ParameterError(f"horizon t must be >= 1, got {t}")
    if scheme.kind == "uniform":
        return np.full(t, 1.0 / t)
    gamma = scheme.gamma
    powers = np.power(gamma, np.arange(t - 1, -1, -1, dtype=np.float64))
    return (1.0 - gamma) / (1.0 - gamma**t) * powers


def recursion_coefficients(scheme: WeightScheme, t: int) -> tuple:
    """(old_coeff, new_coeff) for the accumulator transition t -> t + 1.

    The temporally weighted objective at t + 1 equals
    old_coeff * (objective at t) + new_coeff * (newest instantaneous loss),
    with the coefficients summing to one.
    """
    if t < 1:
        raise ParameterError(f"transition index t must be >= 1, got {t}")
    if scheme.kind == "uniform":
        return t / (t + 1.0), 1.0 / (t + 1.0)
    return _discounted_coefficients(scheme.gamma, scheme.gamma**t)


def _discounted_coefficients(gamma, gamma_t):
    # denominator built as the numerator sum (it equals 1 - gamma**(t+1)
    # exactly), so the coefficients sum to 1 up to one rounding per division
    num_old = gamma * (1.0 - gamma_t)
    num_new = 1.0 - gamma
    denom = num_old + num_new
    return num_old / denom, num_new / denom


class GammaPowerTracker:
    """Carries gamma**t across sequential transitions.

    Multiplying the carried power forward is cheaper than exponentiating at
    every step; a direct re-anchor every ``_REANCHOR_PERIOD`` steps bounds
    the accumulated rounding drift.
    """

    def __init__(self, gamma: float, t: int = 1):
        self.gamma = gamma
        self.t = t
        self.power = gamma**t

    def advance(self) -> float:
        """Move to t + 1 and return gamma**(t + 1)."""
        self.t += 1
        if self.t % _REANCHOR_PERIOD == 0:
            self.power = self.gamma**self.t
        else:
            self.power *= self.gamma
        return self.power
