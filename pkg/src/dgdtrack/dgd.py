"""The DGD operator and its E-fold composition.

One step maps the stacked iterate w to  M w - eta * grad(w), where the mix
acts blockwise (output block n is sum_m M[n, m] * w_m) and the gradient is
that of the current temporally weighted objective.  The N*d x N*d Kronecker
matrix is never materialized; the hot loop lives in a compiled kernel with
a pure-numpy fallback (see dgdtrack._backend).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._backend import dgd_inner_steps
from .errors import LogicError, ParameterError
from .network import MixingMatrix, max_stable_step
from .streaming import StreamState

__all__ = ["StackedIterate", "phi_step", "run_inner"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StackedIterate:
    """Network iterate in R^(N*d), agent-major: block n is data[n*d:(n+1)*d]."""

    data: np.ndarray
    n_agents: int
    dim: int

    def __post_init__(self):
        if self.data.shape != (self.n_agents * self.dim,):
            raise LogicError(
                f"iterate length {self.data.shape} does not match N*d = {self.n_agents * self.dim}"
            )
        if not np.all(np.isfinite(self.data)):
            raise LogicError("iterate contains non-finite entries")

    @classmethod
    def zeros(cls, n_agents: int, dim: int) -> "StackedIterate":
        return cls(np.zeros(n_agents * dim), n_agents, dim)

    @classmethod
    def from_blocks(cls, blocks: np.ndarray) -> "StackedIterate":
        blocks = np.asarray(blocks, dtype=np.float64)
        return cls(blocks.ravel().copy(), blocks.shape[0], blocks.shape[1])

    def blocks(self) -> np.ndarray:
        """(N, d) view of the iterate, one agent per row."""
        return self.data.reshape(self.n_agents, self.dim)

    def copy(self) -> "StackedIterate":
        return StackedIterate(self.data.copy(), self.n_agents, self.dim)


def _check_step(mix: MixingMatrix, state: StreamState, eta: float, allow_unstable: bool):
    if not eta > 0:
        raise ParameterError(f"step size must be positive, got {eta}")
    limit = max_stable_step(mix, state.mu, state.L)
    if eta > limit:
        if not allow_unstable:
            raise ParameterError(
                f"eta={eta} exceeds the contraction limit {limit:.6g}; "
                "pass allow_unstable=True to override"
            )
        logger.warning(
            "eta=%g above the contraction limit %g: the one-step map need not "
            "be a contraction and the tracking bounds no longer apply", eta, limit)


def _check_shapes(mix: MixingMatrix, state: StreamState, w: StackedIterate):
    if w.n_agents != state.n_agents or w.dim != state.dim:
        raise LogicError(
            f"iterate is ({w.n_agents}, {w.dim}) but stream is ({state.n_agents}, {state.dim})"
        )
    if mix.n_agents != state.n_agents:
        raise LogicError(f"mixing matrix has {mix.n_agents} agents, stream has {state.n_agents}")


def phi_step(mix: MixingMatrix, state: StreamState, eta: float, w: StackedIterate,
             allow_unstable: bool = False) -> StackedIterate:
    """One application of the DGD map at the stream's current objective."""
    return run_inner(mix, state, eta, 1, w, allow_unstable=allow_unstable)


def run_inner(mix: MixingMatrix, state: StreamState, eta: float, n_steps: int,
              w: StackedIterate, allow_unstable: bool = False) -> StackedIterate:
    """Apply the DGD map ``n_steps`` times, the per-time-index inner loop."""
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps}")
    _check_step(mix, state, eta, allow_unstable)
    _check_shapes(mix, state, w)
    out = np.array(w.blocks(), dtype=np.float64, copy=True, order="C")
    dgd_inner_steps(
        np.ascontiguousarray(mix.entries),
        np.ascontiguousarray(state.weighted_hessian),
        np.ascontiguousarray(state.weighted_target),
        float(eta),
        int(n_steps),
        out,
    )
    return StackedIterate(out.ravel(), w.n_agents, w.dim)
