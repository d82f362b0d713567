# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernels: the hot inner loops of nearest-neighbor retrieval.

Must stay result-identical to `_kernels_py` (same accumulation order, same
pruning rule, same tie-break); the exactness tests compare the two directly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_STACK = 128


cdef inline double _row_distance(
    const double* x, const double* w, const double* q,
    Py_ssize_t dims, double cutoff,
) noexcept nogil:
    # Sequential accumulation; aborts once the partial sum exceeds `cutoff`
    # (an aborted row can be neither the winner nor an exact tie).
    cdef double acc = 0.0
    cdef double diff
    cdef Py_ssize_t d
    for d in range(dims):
        diff = x[d] - q[d]
        acc += w[d] * (diff * diff)
        if acc > cutoff:
            return acc
    return acc


def brute_query(
    const double[:, ::1] X,
    const double[::1] w,
    const double[::1] q,
    Py_ssize_t exclude=-1,
):
    """Linear scan: (local index, squared distance); ties take the lowest index."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t dims = X.shape[1]
    cdef double best = np.inf
    cdef Py_ssize_t best_id = -1
    cdef Py_ssize_t i
    cdef double d2
    with nogil:
        for i in range(n):
            if i == exclude:
                continue
            d2 = _row_distance(&X[i, 0], &w[0], &q[0], dims, best)
            if d2 < best:
                best = d2
                best_id = i
    return best_id, best


cdef inline double _box_bound(
    const double* lo, const double* hi, const double* w, const double* q,
    Py_ssize_t dims, double best,
) noexcept nogil:
    cdef double acc = 0.0
    cdef double v, diff
    cdef Py_ssize_t d
    for d in range(dims):
        v = q[d]
        if v < lo[d]:
            diff = v - lo[d]
        elif v > hi[d]:
            diff = v - hi[d]
        else:
            continue
        acc += w[d] * (diff * diff)
        if acc > best:
            return acc
    return acc


def kd_query(
    const double[:, ::1] Xp,
    const cnp.int64_t[::1] perm,
    const cnp.int32_t[::1] left,
    const cnp.int32_t[::1] right,
    const cnp.int64_t[::1] start,
    const cnp.int64_t[::1] end,
    const double[:, ::1] lo,
    const double[:, ::1] hi,
    const double[::1] w,
    const double[::1] q,
    Py_ssize_t exclude=-1,
):
    """Exact nearest neighbor over a flattened kd-tree; see the fallback twin."""
    cdef Py_ssize_t dims = Xp.shape[1]
    cdef double best = np.inf
    cdef cnp.int64_t best_id = -1
    cdef int node_stack[MAX_STACK]
    cdef double bound_stack[MAX_STACK]
    cdef int top = 0
    cdef int node, l, r
    cdef cnp.int64_t s, e, i, cand
    cdef double bound, bl, br, d2

    node_stack[0] = 0
    bound_stack[0] = 0.0
    top = 1
    with nogil:
        while top > 0:
            top -= 1
            node = node_stack[top]
            bound = bound_stack[top]
            if bound > best:
                continue
            l = left[node]
            if l < 0:
                s = start[node]
                e = end[node]
                for i in range(s, e):
                    cand = perm[i]
                    if cand == exclude:
                        continue
                    d2 = _row_distance(&Xp[i, 0], &w[0], &q[0], dims, best)
                    if d2 < best or (d2 == best and cand < best_id):
                        best = d2
                        best_id = cand
                continue
            r = right[node]
            bl = _box_bound(&lo[l, 0], &hi[l, 0], &w[0], &q[0], dims, best)
            br = _box_bound(&lo[r, 0], &hi[r, 0], &w[0], &q[0], dims, best)
            if bl <= br:
                if br <= best:
                    node_stack[top] = r
                    bound_stack[top] = br
                    top += 1
                if bl <= best:
                    node_stack[top] = l
                    bound_stack[top] = bl
                    top += 1
            else:
                if bl <= best:
                    node_stack[top] = l
                    bound_stack[top] = bl
                    top += 1
                if br <= best:
                    node_stack[top] = r
                    bound_stack[top] = br
                    top += 1
    return <Py_ssize_t>best_id, best
