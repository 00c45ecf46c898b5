# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Every function here has a numpy twin in :mod:`graphonlab._pykernels` with the
same signature; :mod:`graphonlab._kernels` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, INFINITY

cnp.import_array()


def sup_sq_cost(const double[:, :, ::1] X, const double[:, :, ::1] Y):
    """C[i, j] = max_t sum_r (X[i, t, r] - Y[j, t, r])**2."""
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0]
    cdef Py_ssize_t T = X.shape[1], d = X.shape[2]
    cdef Py_ssize_t i, j, t, r
    cdef double best, acc, diff
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] C = out
    with nogil:
        for i in range(n):
            for j in range(m):
                best = 0.0
                for t in range(T):
                    acc = 0.0
                    for r in range(d):
                        diff = X[i, t, r] - Y[j, t, r]
                        acc = acc + diff * diff
                    if acc > best:
                        best = acc
                C[i, j] = best
    return out


def assignment(const double[:, ::1] C):
    """Min-cost perfect matching on a square matrix (shortest augmenting paths
    with potentials). Returns ``cols`` with row ``i`` matched to ``cols[i]``."""
    cdef Py_ssize_t n = C.shape[0]
    if C.shape[1] != n:
        raise ValueError("cost matrix must be square")
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    minv_arr = np.empty(n + 1)
    used_arr = np.empty(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
    cols = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        cols[p[j] - 1] = j - 1
    return cols


def cut_norm_enum(const double[:, ::1] D):
    """Exhaustive max over row subsets S of max(sum of positive column sums,
    -sum of negative column sums). Returns (raw value, best S bitmask)."""
    cdef Py_ssize_t n = D.shape[0], m = D.shape[1]
    cdef Py_ssize_t j, flip
    cdef unsigned long long k, total = 1ULL << n, mask = 0, best_mask = 0
    cdef double pos, neg, val, best = 0.0
    colsum_arr = np.zeros(m)
    cdef double[::1] colsum = colsum_arr
    with nogil:
        for k in range(1, total):
            flip = 0
            while not ((k >> flip) & 1ULL):
                flip += 1
            mask ^= (1ULL << flip)
            if (mask >> flip) & 1ULL:
                for j in range(m):
                    colsum[j] += D[flip, j]
            else:
                for j in range(m):
                    colsum[j] -= D[flip, j]
            pos = 0.0
            neg = 0.0
            for j in range(m):
                if colsum[j] > 0.0:
                    pos += colsum[j]
                else:
                    neg -= colsum[j]
            val = pos if pos > neg else neg
            if val > best:
                best = val
                best_mask = mask
    return best, int(best_mask)


def inf_to_one_enum(const double[:, ::1] D):
    """Exhaustive max over g in {-1,+1}^n (g[0] = +1) of sum_i |(D g)_i|.
    Returns (raw value, bitmask of the coordinates set to -1)."""
    cdef Py_ssize_t n = D.shape[0], m = D.shape[1]
    cdef Py_ssize_t i, j, flip
    cdef unsigned long long k, total, mask = 0, best_mask = 0
    cdef double val, best, s
    if m == 0:
        return 0.0, 0
    total = 1ULL << (m - 1)
    r_arr = np.asarray(D).sum(axis=1)
    cdef double[::1] r = r_arr
    best = 0.0
    for i in range(n):
        best += abs(r[i])
    with nogil:
        for k in range(1, total):
            flip = 0
            while not ((k >> flip) & 1ULL):
                flip += 1
            mask ^= (1ULL << flip)
            # coordinate flip+1 toggles; bit set means g = -1
            s = -2.0 if (mask >> flip) & 1ULL else 2.0
            val = 0.0
            for i in range(n):
                r[i] += s * D[i, flip + 1]
                val += r[i] if r[i] >= 0.0 else -r[i]
            if val > best:
                best = val
                best_mask = mask << 1
    return best, int(best_mask)


def weighted_tanh_sum(const double[:, ::1] X, const double[:, ::1] W,
                      const double[:, ::1] Y):
    """out[i, r] = sum_j W[i, j] * tanh(Y[j, r] - X[i, r]); zero weights skipped.

    Differences are filled a block of rows at a time and passed through
    numpy's vectorized tanh in place; libm's scalar tanh is several times
    slower.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], N = Y.shape[0]
    cdef Py_ssize_t i, j, r, b, start, stop
    cdef Py_ssize_t block = max(1, min(n, 262144 // max(1, N * d)))
    cdef double w, acc
    out = np.zeros((n, d))
    cdef double[:, ::1] o = out
    buf = np.empty((block, N, d))
    cdef double[:, :, ::1] B = buf
    for start in range(0, n, block):
        stop = min(n, start + block)
        with nogil:
            for i in range(start, stop):
                b = i - start
                for j in range(N):
                    for r in range(d):
                        B[b, j, r] = Y[j, r] - X[i, r]
        np.tanh(buf[:stop - start], out=buf[:stop - start])
        with nogil:
            for i in range(start, stop):
                b = i - start
                for r in range(d):
                    acc = 0.0
                    for j in range(N):
                        w = W[i, j]
                        if w != 0.0:
                            acc = acc + w * B[b, j, r]
                    o[i, r] = acc
    return out
