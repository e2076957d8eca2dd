"""Streaming quadratic losses and their temporally weighted accumulators.

Each agent n observes one quadratic sample per time step: a diagonal
Hessian with entries drawn uniformly from [mu, L] and a center following a
bounded Gaussian random walk.  The weighted objective over all history is
represented exactly by two per-agent accumulators,

    weighted_hessian[n] = sum_i a_i(t) * A_{n,i}          (diagonal entries)
    weighted_target[n]  = sum_i a_i(t) * A_{n,i} c_{n,i}

updated by the scheme's two-term recursion, so the unbounded-memory
objective costs O(N*d) memory.  Retaining full history is an opt-in debug
flag used by the recursion-equivalence cross-checks.
"""

from __future__ import annotations

import numpy as np

from .errors import LogicError, NumericalError, ParameterError
from .weighting import (GammaPowerTracker, WeightScheme, _discounted_coefficients,
                        recursion_coefficients)

__all__ = [
    "StreamState",
    "init_stream",
    "step_drift",
    "ingest_sample",
    "weighted_gradient",
    "dump_stream_csv",
    "load_stream_csv",
]


class StreamState:
    """Per-agent samples and weighted accumulators at the current time index.

    Attributes
    ----------
    t : int
        Current time index (>= 1).
    hessians, centers : ndarray, shape (N, d)
        The time-t samples: diagonal Hessian entries and centers.
    weighted_hessian, weighted_target : ndarray, shape (N, d)
        The temporally weighted accumulators defining the current objective.
    history : list of (hessians, centers) or None
        Full sample record, one entry per time index, when retention is on.
    """

    def __init__(self, n_agents, dim, mu, L, C_max, sigma2, hessians, centers, keep_history,
                 homogeneous=False):
        self.n_agents = n_agents
        self.dim = dim
        self.mu = mu
        self.L = L
        self.C_max = C_max
        self.sigma2 = sigma2
        self.homogeneous = homogeneous
        self.t = 1
        self.hessians = hessians
        self.centers = centers
        self.weighted_hessian = hessians.copy()
        self.weighted_target = hessians * centers
        self.history = [(hessians.copy(), centers.copy())] if keep_history else None
        self._pending = None  # samples for t + 1, set by step_drift
        self._scheme: WeightScheme | None = None  # bound on first ingest
        self._gamma_tracker: GammaPowerTracker | None = None

    @property
    def global_hessian(self) -> np.ndarray:
        """Diagonal of the weighted network Hessian, summed over agents."""
        return self.weighted_hessian.sum(axis=0)

    @property
    def global_target(self) -> np.ndarray:
        return self.weighted_target.sum(axis=0)

    def check_invariants(self):
        if not (np.all(self.weighted_hessian >= self.mu - 1e-12)
                and np.all(self.weighted_hessian <= self.L + 1e-12)):
            raise NumericalError("weighted Hessian entries escaped [mu, L]")
        if np.max(np.abs(self.centers)) > self.C_max * (1 + 1e-12):
            raise NumericalError("center coordinates escaped [-C_max, C_max]")


def _draw_uniform(rng, lo, hi, n, d, homogeneous):
    if homogeneous:
        return np.repeat(rng.uniform(lo, hi, size=(1, d)), n, axis=0)
    return rng.uniform(lo, hi, size=(n, d))


def init_stream(n_agents, dim, mu, L, C_max, sigma2, rng,
                homogeneous=False, keep_history=False) -> StreamState:
    """Draw the t = 1 samples and seed the accumulators with them.

    Centers start uniform on [-C_max, C_max]^d; the Gaussian walk applies to
    later transitions.  With ``homogeneous`` every agent shares one sample
    stream (the heterogeneity-free configuration in which the
    decentralization bias vanishes).
    """
    if n_agents < 1 or dim < 1:
        raise ParameterError(f"need n_agents >= 1 and dim >= 1, got {n_agents}, {dim}")
    if not (0 < mu <= L):
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not (C_max > 0):
        raise ParameterError(f"C_max must be positive, got {C_max}")
    if sigma2 < 0:
        raise ParameterError(f"sigma2 must be nonnegative, got {sigma2}")
    centers = _draw_uniform(rng, -C_max, C_max, n_agents, dim, homogeneous)
    hessians = _draw_uniform(rng, mu, L, n_agents, dim, homogeneous)
    return StreamState(n_agents, dim, mu, L, C_max, sigma2, hessians, centers,
                       keep_history, homogeneous)


def step_drift(state: StreamState, rng) -> None:
    """Draw the samples for time t + 1: walked centers and fresh Hessians.

    Each center coordinate moves by an independent Gaussian increment of
    variance sigma2 and is clipped back to [-C_max, C_max]; Hessian entries
    are redrawn uniformly from [mu, L].  The samples are staged for the next
    ``ingest_sample`` call, keeping the accumulators at time t untouched.
    """
    if state._pending is not None:
        raise LogicError(f"samples for t={state.t + 1} already drawn and not ingested")
    n, d = state.n_agents, state.dim
    sigma = np.sqrt(state.sigma2)
    if state.homogeneous:
        z = np.repeat(rng.normal(0.0, sigma, size=(1, d)), n, axis=0)
    else:
        z = rng.normal(0.0, sigma, size=(n, d))
    new_centers = np.clip(state.centers + z, -state.C_max, state.C_max)
    new_hessians = _draw_uniform(rng, state.mu, state.L, n, d, state.homogeneous)
    state._pending = (new_hessians, new_centers)


def ingest_sample(state: StreamState, scheme: WeightScheme) -> StreamState:
    """Fold the staged t + 1 samples into the accumulators and advance time.

    Uses the scheme's exact recursion coefficients, so the accumulators
    equal the direct weighted sum over all history.  The scheme is bound on
    first use; passing a different scheme later is a logic error because the
    accumulators already embed the earlier weights.
    """
    if state._pending is None:
        raise LogicError(f"no staged samples: call step_drift before ingesting t={state.t + 1}")
    if state._scheme is None:
        state._scheme = scheme
        if scheme.kind == "discounted":
            state._gamma_tracker = GammaPowerTracker(scheme.gamma, t=state.t)
    elif state._scheme != scheme:
        raise LogicError(
            f"stream is bound to {state._scheme.label()}; cannot ingest with {scheme.label()}"
        )

    if scheme.kind == "uniform":
        old_c, new_c = recursion_coefficients(scheme, state.t)
    else:
        tracker = state._gamma_tracker
        if tracker.t != state.t:
            raise LogicError(f"scheme horizon {tracker.t} does not match stream time {state.t}")
        old_c, new_c = _discounted_coefficients(scheme.gamma, tracker.power)
        tracker.advance()

    hessians, centers = state._pending
    state._pending = None
    state.hessians = hessians
    state.centers = centers
    state.weighted_hessian = old_c * state.weighted_hessian + new_c * hessians
    state.weighted_target = old_c * state.weighted_target + new_c * (hessians * centers)
    state.t += 1
    if state.history is not None:
        state.history.append((hessians.copy(), centers.copy()))
    return state


def weighted_gradient(state: StreamState, w) -> np.ndarray:
    """Gradient of the stacked weighted objective at the stacked iterate.

    Block n of the result is weighted_hessian[n] * w[n] - weighted_target[n].
    Accepts a StackedIterate or a flat array of length N*d.
    """
    vec = np.asarray(getattr(w, "data", w), dtype=np.float64)
    if vec.shape != (state.n_agents * state.dim,):
        raise LogicError(
            f"iterate has {vec.shape} entries, expected ({state.n_agents * state.dim},)"
        )
    blocks = vec.reshape(state.n_agents, state.dim)
    return (state.weighted_hessian * blocks - state.weighted_target).ravel()


def dump_stream_csv(state: StreamState, path):
    """Write the retained sample history as CSV, one row per (t, agent).

    Columns: t, agent, h_0..h_{d-1}, c_0..c_{d-1} with 17-significant-digit
    floats, enough to replay the run through the oracle offline.
    """
    if state.history is None:
        raise LogicError("stream dump requires history retention (keep_history=True)")
    d = state.dim
    header = ["t", "agent"] + [f"h_{j}" for j in range(d)] + [f"c_{j}" for j in range(d)]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for t_idx, (hessians, centers) in enumerate(state.history, start=1):
            for n in range(state.n_agents):
                vals = [str(t_idx), str(n)]
                vals += [f"{v:.17g}" for v in hessians[n]]
                vals += [f"{v:.17g}" for v in centers[n]]
                fh.write(",".join(vals) + "\n")


def load_stream_csv(path):
    """Read a stream dump back as a list of (hessians, centers) per time index."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        d = (len(header) - 2) // 2
        rows = [line.strip().split(",") for line in fh if line.strip()]
    ts = sorted({int(r[0]) for r in rows})
    n = max(int(r[1]) for r in rows) + 1
    out = []
    for t_idx in ts:
        hessians = np.zeros((n, d))
        centers = np.zeros((n, d))
        for r in rows:
            if int(r[0]) == t_idx:
                agent = int(r[1])
                hessians[agent] = [float(v) for v in r[2 : 2 + d]]
                centers[agent] = [float(v) for v in r[2 + d :]]
        out.append((hessians, centers))
    return out
