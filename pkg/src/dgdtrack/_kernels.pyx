# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled DGD inner-loop kernel.

Runs the E inner iterations entirely in C: the gossip mix goes through
BLAS dgemm (row-major M @ w expressed as the transposed column-major
product), the diagonal-quadratic gradient step is a fused vector pass, and
the two buffers are pointer-swapped.  One scratch allocation per call,
nothing inside the loop.  Contract matches dgdtrack._kernels_py.
"""

from libc.string cimport memcpy

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

COMPILED = True


cdef void _inner_steps(const double* mixing, const double* hessian,
                       const double* target, double eta, Py_ssize_t n_steps,
                       int n, int d, double* w, double* scratch) noexcept nogil:
    cdef double* cur = w
    cdef double* nxt = scratch
    cdef double* tmp
    cdef double one = 1.0, zero = 0.0
    cdef char no_trans = b'N'
    cdef Py_ssize_t k, i, j, row
    for k in range(n_steps):
        # row-major nxt = M @ cur  <=>  col-major nxt^T = cur^T @ M^T
        dgemm(&no_trans, &no_trans, &d, &n, &n, &one,
              cur, &d, mixing, &n, &zero, nxt, &d)
        for i in range(n):
            row = i * d
            for j in range(d):
                nxt[row + j] -= eta * (hessian[row + j] * cur[row + j]
                                       - target[row + j])
        tmp = cur
        cur = nxt
        nxt = tmp
    if cur != w:
        memcpy(w, cur, n * d * sizeof(double))


def dgd_inner_steps(const double[:, ::1] mixing, const double[:, ::1] hessian,
                    const double[:, ::1] target, double eta, Py_ssize_t n_steps,
                    double[:, ::1] w):
    """In-place E-fold application of  w <- M @ w - eta * (hessian * w - target)."""
    cdef int n = <int> w.shape[0]
    cdef int d = <int> w.shape[1]
    scratch_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] scratch = scratch_arr
    with nogil:
        _inner_steps(&mixing[0, 0], &hessian[0, 0], &target[0, 0],
                     eta, n_steps, n, d, &w[0, 0], &scratch[0, 0])
