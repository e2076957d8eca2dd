"""Closed-form constants and tracking-error envelopes.

Everything here is arithmetic on the problem constants: the contraction
factor alpha = (1 - eta*mu)**E, the gradient bound G = 2*L*C*sqrt(N*kappa)
with C = C_max*sqrt(d) (the per-coordinate center bound lifted to the
Euclidean norm), the topology factor, the summation constants behind the
uniform 1/t envelope and the discounted floor, and the resulting
tracking-error bounds.

The geometric-harmonic sums S(t) and S_gamma(t) are evaluated by direct
accumulation (S(t+1) = alpha * (S(t) + u_t) is the sum itself, rearranged),
never by the closed-form envelopes they certify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, TheoryDegeneracyError

__all__ = [
    "TheoryConstants",
    "constants_from_problem",
    "uniform_sum",
    "discounted_sum",
    "uniform_sum_curve",
    "discounted_sum_curve",
    "uniform_constants",
    "discounted_constants",
    "bound_uniform",
    "bound_discounted",
    "ate_uniform",
    "ate_discounted",
    "drift_bound_uniform",
    "drift_bound_discounted",
    "bias_bound",
]


@dataclass(frozen=True)
class TheoryConstants:
    """Problem constants consumed by the bound evaluators.

    ``init_dist`` is the measured distance from the initial iterate to the
    first fixed point; it is per-run data, filled in by the experiment.
    """

    mu: float
    L: float
    kappa: float
    eta: float
    E: int
    alpha: float
    C: float
    G: float
    Lambda: float
    init_dist: float | None = None

    def with_init_dist(self, init_dist: float) -> "TheoryConstants":
        return replace(self, init_dist=float(init_dist))


def constants_from_problem(mu, L, eta, E, n_agents, dim, C_max, lambda2) -> TheoryConstants:
    """Assemble TheoryConstants from raw problem parameters.

    ``lambda2`` may be NaN for a single agent; the topology factor is the
    +inf sentinel there.
    """
    if not (0 < mu <= L):
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if E < 1:
        raise ParameterError(f"E must be >= 1, got {E}")
    kappa = L / mu
    alpha = (1.0 - eta * mu) ** E
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha=(1-eta*mu)**E = {alpha} outside (0, 1); eta too large")
    c_const = C_max * math.sqrt(dim)
    g_const = 2.0 * L * c_const * math.sqrt(n_agents * kappa)
    if math.isnan(lambda2):
        topology = float("inf")
    else:
        topology = 1.0 / (1.0 - lambda2)
    return TheoryConstants(mu=mu, L=L, kappa=kappa, eta=eta, E=E, alpha=alpha,
                           C=c_const, G=g_const, Lambda=topology)


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0, 1), got {alpha}")


def uniform_sum(alpha: float, t: int) -> float:
    """S(t) = sum_{i=1}^{t-1} alpha**(t-i) / (i+1), by direct accumulation."""
    _check_alpha(alpha)
    s = 0.0
    for tau in range(1, t):
        s = alpha * (s + 1.0 / (tau + 1.0))
    return s


def uniform_sum_curve(alpha: float, t_max: int) -> np.ndarray:
    """S(t) for t = 1..t_max (index 0 is t=1, an empty sum)."""
    _check_alpha(alpha)
    out = np.zeros(t_max)
    s = 0.0
    for tau in range(1, t_max):
        s = alpha * (s + 1.0 / (tau + 1.0))
        out[tau] = s
    return out


def discounted_sum(gamma: float, alpha: float, t: int) -> float:
    """S_gamma(t) = sum_{i=1}^{t-1} (1-gamma) * alpha**(t-i) / (1 - gamma**(i+1))."""
    _check_alpha(alpha)
    _check_alpha(gamma)
    s = 0.0
    gpow = gamma  # gamma**tau
    for tau in range(1, t):
        gpow *= gamma
        s = alpha * (s + (1.0 - gamma) / (1.0 - gpow))
    return s


def discounted_sum_curve(gamma: float, alpha: float, t_max: int) -> np.ndarray:
    _check_alpha(alpha)
    _check_alpha(gamma)
    out = np.zeros(t_max)
    s = 0.0
    gpow = gamma
    for tau in range(1, t_max):
        gpow *= gamma
        s = alpha * (s + (1.0 - gamma) / (1.0 - gpow))
        out[tau] = s
    return out


def uniform_constants(alpha: float) -> tuple:
    """(t0, A) such that S(t) <= A / t for all t >= t0.

    t0 = ceil(2*alpha / (1-alpha)), floored at 1 so the quantifier is
    well-posed; A = max(t0 * S(t0), 2*alpha / (1-alpha)).
    """
    _check_alpha(alpha)
    ratio = 2.0 * alpha / (1.0 - alpha)
    t0 = max(math.ceil(ratio), 1)
    s_t0 = uniform_sum(alpha, t0)
    return t0, max(t0 * s_t0, ratio)


def discounted_constants(alpha: float, gamma: float) -> tuple:
    """(t0, A_gamma, floor) for the discounted envelope.

    t0 = ceil(ln((1-alpha) / (1+alpha-2*gamma*alpha)) / ln(gamma)), floored
    at 1; A_gamma = max((1-gamma**t0) * S_gamma(t0) / (1-gamma),
    2*alpha/(1-alpha)); floor is the limit (1-gamma)*alpha/(1-alpha) of
    S_gamma.  Raises TheoryDegeneracyError when the log argument leaves
    (0, 1) (unreachable for alpha, gamma in (0, 1), but guarded).
    """
    _check_alpha(alpha)
    _check_alpha(gamma)
    denom = 1.0 + alpha - 2.0 * gamma * alpha
    if denom <= 0.0:
        raise TheoryDegeneracyError(
            f"(alpha={alpha}, gamma={gamma}) makes 1 + alpha - 2*gamma*alpha = {denom} <= 0"
        )
    log_arg = (1.0 - alpha) / denom
    if not (0.0 < log_arg < 1.0):
        raise TheoryDegeneracyError(
            f"(alpha={alpha}, gamma={gamma}) puts the burn-in log argument at {log_arg}, "
            "outside (0, 1)"
        )
    t0 = max(math.ceil(math.log(log_arg) / math.log(gamma)), 1)
    s_t0 = discounted_sum(gamma, alpha, t0)
    ratio = 2.0 * alpha / (1.0 - alpha)
    a_gamma = max((1.0 - gamma**t0) * s_t0 / (1.0 - gamma), ratio)
    floor = (1.0 - gamma) * alpha / (1.0 - alpha)
    return t0, a_gamma, floor


def _check_bound_domain(tc: TheoryConstants, t: int, t0: int):
    if t < t0:
        raise ParameterError(f"bound not asserted below the burn-in index: t={t} < t0={t0}")
    if tc.init_dist is None:
        raise ParameterError("TheoryConstants.init_dist not set; measure ||w0 - fixed point|| first")


def bound_uniform(tc: TheoryConstants, A: float, t0: int, t: int) -> float:
    """Uniform-weights tracking-error bound:
    alpha**t * init_dist + (2G/mu) * A/t + eta*kappa*Lambda*G."""
    _check_bound_domain(tc, t, t0)
    return (tc.alpha**t * tc.init_dist
            + (2.0 * tc.G / tc.mu) * (A / t)
            + tc.eta * tc.kappa * tc.Lambda * tc.G)


def bound_discounted(tc: TheoryConstants, A_gamma: float, t0: int, gamma: float, t: int) -> float:
    """Discounted-weights tracking-error bound:
    alpha**t * init_dist + (2G/mu) * A_gamma*(1-gamma)/(1-gamma**t) + eta*kappa*Lambda*G."""
    _check_bound_domain(tc, t, t0)
    return (tc.alpha**t * tc.init_dist
            + (2.0 * tc.G / tc.mu) * A_gamma * (1.0 - gamma) / (1.0 - gamma**t)
            + tc.eta * tc.kappa * tc.Lambda * tc.G)


def ate_uniform(tc: TheoryConstants) -> float:
    """limsup of the uniform-weights tracking error: the bias floor."""
    return tc.eta * tc.kappa * tc.Lambda * tc.G


def ate_discounted(tc: TheoryConstants, gamma: float) -> float:
    """limsup of the discounted tracking error:
    (2G/mu) * (1-gamma)*alpha/(1-alpha) + eta*kappa*Lambda*G."""
    _check_alpha(gamma)
    return ((2.0 * tc.G / tc.mu) * (1.0 - gamma) * tc.alpha / (1.0 - tc.alpha)
            + tc.eta * tc.kappa * tc.Lambda * tc.G)


def drift_bound_uniform(G: float, mu: float, t: int) -> float:
    """Envelope on the fixed-point drift over the step t -> t+1: 2G / (mu*(t+1))."""
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    return 2.0 * G / (mu * (t + 1.0))


def drift_bound_discounted(G: float, mu: float, gamma: float, t: int) -> float:
    """Discounted drift envelope: (2G/mu) * (1-gamma) / (1-gamma**(t+1))."""
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    _check_alpha(gamma)
    return (2.0 * G / mu) * (1.0 - gamma) / (1.0 - gamma ** (t + 1.0))


def bias_bound(tc: TheoryConstants, grad_norm_at_opt: float, n_agents: int) -> float:
    """Instance bias envelope eta*kappa*Lambda*||grad at the optimizer||.

    A single agent has no decentralization bias: the weighted gradient
    vanishes at the optimizer while the topology factor is the +inf
    sentinel, so the bound is reported as zero instead of inf * 0.
    """
    if n_agents == 1:
        return 0.0
    return tc.eta * tc.kappa * tc.Lambda * grad_norm_at_opt
