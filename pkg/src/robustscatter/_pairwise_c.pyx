# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the pairwise-difference accumulation kernel.

Mirrors ``_pairwise_py.pair_block_accum`` exactly (same weight-kind codes,
same drop rule); the GIL is released inside the pair loop so blocks can run
on worker threads.
"""

from libc.math cimport pow

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _weight(int kind, double coef, double alpha, double s) noexcept nogil:
    if kind == 1:
        return coef / (1.0 + s)
    if kind == 2:
        return 1.0 if s <= coef else coef / s
    if kind == 3:
        return coef / s
    if kind == 4:
        if s == 0.0:
            return 1.0 if alpha == 0.0 else 0.0
        return pow(s, 0.5 * alpha)
    return 1.0


def pair_block_accum(x, a, Py_ssize_t i0, Py_ssize_t i1, int kind,
                     double coef, double alpha, double drop_tol):
    """Accumulate weighted outer products of pairwise differences.

    Returns (S, wsum, used, dropped) for the pairs {(i, j): i0 <= i < i1, j < i}.
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t p = xv.shape[1]
    out = np.zeros((p, p))
    cdef double[:, ::1] sv = out
    dbuf = np.empty(p)
    cdef double[::1] d = dbuf
    cdef double wsum = 0.0
    cdef Py_ssize_t used = 0, dropped = 0
    cdef Py_ssize_t i, j, k, l
    cdef double q, acc, w, wk
    if i1 <= 1 or i1 <= i0:
        return out, 0.0, 0, 0
    with nogil:
        for i in range(i0, i1):
            for j in range(i):
                for k in range(p):
                    d[k] = xv[i, k] - xv[j, k]
                # d' a d with a symmetric: diagonal plus twice the upper part
                q = 0.0
                for k in range(p):
                    acc = 0.5 * av[k, k] * d[k]
                    for l in range(k + 1, p):
                        acc = acc + av[k, l] * d[l]
                    q = q + 2.0 * d[k] * acc
                if q < 0.0:
                    q = 0.0
                if drop_tol > 0.0 and q <= drop_tol:
                    dropped += 1
                    continue
                w = _weight(kind, coef, alpha, q)
                wsum += w
                used += 1
                for k in range(p):
                    wk = w * d[k]
                    for l in range(k, p):
                        sv[k, l] += wk * d[l]
    for k in range(p):
        for l in range(k):
            sv[k, l] = sv[l, k]
    return out, wsum, used, dropped
