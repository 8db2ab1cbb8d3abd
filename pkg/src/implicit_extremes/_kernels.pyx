# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched built-in loss evaluation and per-block top-m selection.

Semantics are pinned by ``_kernels_py``.  Selection results agree exactly;
loss values agree exactly except for the power-based families (lp-norm,
geometric mean), where numpy's ``power`` and libm ``pow`` may differ by an ulp.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, INFINITY

cnp.import_array()

# keep in sync with _kernels_py.KIND_CODES
DEF HARMONIC = 0
DEF EUCLIDEAN = 1
DEF WEIGHTED_SUM = 2
DEF LP_NORM = 3
DEF MIN = 4
DEF GEOMETRIC_MEAN = 5


def builtin_loss(int kind, const double[:, ::1] x, const double[::1] weights,
                 double p, double factor):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, v, inv_d
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    inv_d = 1.0 / d
    with nogil:
        for i in range(n):
            if kind == HARMONIC:
                acc = 0.0
                for j in range(d):
                    v = x[i, j]
                    if v > 0.0:
                        acc = acc + 1.0 / v
                    else:
                        acc = INFINITY
                out[i] = 1.0 / acc
            elif kind == EUCLIDEAN:
                acc = 0.0
                for j in range(d):
                    acc = acc + x[i, j] * x[i, j]
                out[i] = sqrt(acc)
            elif kind == WEIGHTED_SUM:
                acc = 0.0
                for j in range(d):
                    v = x[i, j]
                    if v > 0.0:
                        acc = acc + weights[j] * v
                    else:
                        acc = acc + weights[j] * 0.0
                out[i] = acc
            elif kind == LP_NORM:
                acc = 0.0
                for j in range(d):
                    acc = acc + pow(fabs(x[i, j]), p)
                out[i] = pow(acc, 1.0 / p)
            elif kind == MIN:
                acc = INFINITY
                for j in range(d):
                    v = x[i, j]
                    if v < 0.0:
                        v = 0.0
                    if v < acc:
                        acc = v
                out[i] = acc
            else:
                acc = 1.0
                for j in range(d):
                    v = x[i, j]
                    if v < 0.0:
                        v = 0.0
                    acc = acc * pow(v, inv_d)
                out[i] = acc
            out[i] = out[i] * factor
    return out_arr


def block_top_m(const double[:, ::1] losses, Py_ssize_t m):
    """Indices of the m largest entries per row, ties broken by smaller index."""
    cdef Py_ssize_t rows = losses.shape[0]
    cdef Py_ssize_t n = losses.shape[1]
    cdef Py_ssize_t r, j, pos, filled
    cdef double v
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= {n}, got {m}")
    idx_arr = np.empty((rows, m), dtype=np.int64)
    val_arr = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef double[::1] top = val_arr
    with nogil:
        for r in range(rows):
            filled = 0
            for j in range(n):
                v = losses[r, j]
                if v != v:
                    # NaN sorts after every number, as in the numpy path
                    continue
                if filled == m and not (v > top[m - 1]):
                    continue
                if filled < m:
                    pos = filled
                    filled = filled + 1
                else:
                    pos = m - 1
                # strict comparison keeps earlier indices ahead on ties
                while pos > 0 and v > top[pos - 1]:
                    top[pos] = top[pos - 1]
                    idx[r, pos] = idx[r, pos - 1]
                    pos = pos - 1
                top[pos] = v
                idx[r, pos] = j
            if filled < m:
                # only reachable with NaN losses; pad like a stable argsort would
                for j in range(n):
                    v = losses[r, j]
                    if v != v and filled < m:
                        idx[r, filled] = j
                        filled = filled + 1
    return idx_arr
