"""Numpy implementations of the kernels in ``_core.pyx``.

Same signatures and return conventions. Used when the extension is not built
or when ``GRAPHONLAB_BACKEND=python`` is set.
"""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 14


def sup_sq_cost(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    diff = X[:, None, :, :] - Y[None, :, :, :]
    return (diff * diff).sum(axis=-1).max(axis=-1, initial=0.0)


def assignment(C):
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    if C.shape[1] != n:
        raise ValueError("cost matrix must be square")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
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
    cols[p[1:] - 1] = np.arange(n)
    return cols


def _bit_rows(start, stop, n):
    k = np.arange(start, stop, dtype=np.int64)
    return ((k[:, None] >> np.arange(n)) & 1).astype(np.float64)


def cut_norm_enum(D):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    best, best_mask = 0.0, 0
    for start in range(0, 1 << n, _CHUNK):
        stop = min(start + _CHUNK, 1 << n)
        colsum = _bit_rows(start, stop, n) @ D
        pos = np.where(colsum > 0, colsum, 0.0).sum(axis=1)
        neg = -np.where(colsum < 0, colsum, 0.0).sum(axis=1)
        val = np.maximum(pos, neg)
        k = int(np.argmax(val))
        if val[k] > best:
            best, best_mask = float(val[k]), start + k
    return best, best_mask


def inf_to_one_enum(D):
    D = np.asarray(D, dtype=np.float64)
    m = D.shape[1]
    if m == 0:
        return 0.0, 0
    best, best_mask = float(np.abs(D.sum(axis=1)).sum()), 0
    for start in range(0, 1 << (m - 1), _CHUNK):
        stop = min(start + _CHUNK, 1 << (m - 1))
        bits = _bit_rows(start, stop, m - 1)
        signs = np.hstack([np.ones((bits.shape[0], 1)), 1.0 - 2.0 * bits])
        val = np.abs(signs @ D.T).sum(axis=1)
        k = int(np.argmax(val))
        if val[k] > best:
            best, best_mask = float(val[k]), (start + k) << 1
    return best, best_mask


def weighted_tanh_sum(X, W, Y):
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    return np.einsum("ij,ijr->ir", W, np.tanh(Y[None, :, :] - X[:, None, :]))
