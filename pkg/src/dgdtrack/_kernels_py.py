"""Pure-numpy fallback for the DGD inner-loop kernel.

Same contract as the compiled extension ``dgdtrack._kernels``: apply the
gossip-then-gradient map to an (N, d) block iterate ``n_steps`` times, in
place, allocating only two scratch buffers per call (never inside the
step loop).
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def dgd_inner_steps(mixing, hessian, target, eta, n_steps, w):
    """In-place E-fold application of  w <- M @ w - eta * (hessian * w - target).

    ``mixing`` is (N, N); ``hessian``, ``target`` and ``w`` are (N, d) with
    agent-major blocks as rows.  The gradient term uses the pre-mix iterate,
    matching the one-step DGD map.
    """
    n, d = w.shape
    nxt = np.empty((n, d))
    grad = np.empty((n, d))
    cur = w
    for _ in range(n_steps):
        np.matmul(mixing, cur, out=nxt)
        np.multiply(hessian, cur, out=grad)
        grad -= target
        grad *= eta
        nxt -= grad
        cur, nxt = nxt, cur
    if cur is not w:
        np.copyto(w, cur)
