# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain dynamic programming kernels.

Same contracts as elcrf.kernels.pychain; see there for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log

cnp.import_array()

name = "compiled"


cdef inline double _lse(const double* vals, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = -INFINITY
    cdef double s = 0.0
    for i in range(n):
        if vals[i] > m:
            m = vals[i]
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        s += exp(vals[i] - m)
    return m + log(s)


def forward_logz(double[:, ::1] emit, double[:, ::1] trans):
    cdef Py_ssize_t T = emit.shape[0]
    cdef Py_ssize_t M = emit.shape[1]
    # transpose once so the inner reduction walks contiguous memory
    cdef double[:, ::1] trans_t = np.ascontiguousarray(np.asarray(trans).T)
    cdef cnp.ndarray[double, ndim=1] alpha_arr = np.empty(M)
    cdef cnp.ndarray[double, ndim=1] nxt_arr = np.empty(M)
    cdef cnp.ndarray[double, ndim=1] cand_arr = np.empty(M)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] cand = cand_arr
    cdef Py_ssize_t t, i, j
    with nogil:
        for j in range(M):
            alpha[j] = emit[0, j]
        for t in range(1, T):
            for j in range(M):
                for i in range(M):
                    cand[i] = alpha[i] + trans_t[j, i]
                nxt[j] = emit[t, j] + _lse(&cand[0], M)
            for j in range(M):
                alpha[j] = nxt[j]
    return float(_lse(&alpha[0], M))


def forward_backward(double[:, ::1] emit, double[:, ::1] trans):
    cdef Py_ssize_t T = emit.shape[0]
    cdef Py_ssize_t M = emit.shape[1]
    cdef double[:, ::1] trans_t = np.ascontiguousarray(np.asarray(trans).T)
    cdef cnp.ndarray[double, ndim=2] alpha_arr = np.empty((T, M))
    cdef cnp.ndarray[double, ndim=2] beta_arr = np.empty((T, M))
    cdef cnp.ndarray[double, ndim=2] node_arr = np.empty((T, M))
    cdef cnp.ndarray[double, ndim=3] edge_arr = np.empty((T - 1, M, M))
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] node = node_arr
    cdef double[:, :, ::1] edge = edge_arr
    cdef cnp.ndarray[double, ndim=1] cand_arr = np.empty(M)
    cdef double[::1] cand = cand_arr
    cdef double log_z, s
    cdef Py_ssize_t t, i, j
    with nogil:
        for j in range(M):
            alpha[0, j] = emit[0, j]
        for t in range(1, T):
            for j in range(M):
                for i in range(M):
                    cand[i] = alpha[t - 1, i] + trans_t[j, i]
                alpha[t, j] = emit[t, j] + _lse(&cand[0], M)
        for i in range(M):
            beta[T - 1, i] = 0.0
        for t in range(T - 2, -1, -1):
            for i in range(M):
                for j in range(M):
                    cand[j] = trans[i, j] + emit[t + 1, j] + beta[t + 1, j]
                beta[t, i] = _lse(&cand[0], M)
        log_z = _lse(&alpha[T - 1, 0], M)
    if log_z == -INFINITY:
        raise FloatingPointError("lattice has no path with finite score")
    with nogil:
        for t in range(T):
            for j in range(M):
                s = alpha[t, j] + beta[t, j]
                node[t, j] = exp(s - log_z) if s != -INFINITY else 0.0
        for t in range(T - 1):
            for i in range(M):
                for j in range(M):
                    s = alpha[t, i] + trans[i, j] + emit[t + 1, j] + beta[t + 1, j]
                    edge[t, i, j] = exp(s - log_z) if s != -INFINITY else 0.0
    return float(log_z), node_arr, edge_arr


def viterbi_path(double[:, ::1] emit, double[:, ::1] trans):
    cdef Py_ssize_t T = emit.shape[0]
    cdef Py_ssize_t M = emit.shape[1]
    cdef double[:, ::1] trans_t = np.ascontiguousarray(np.asarray(trans).T)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] ptr_arr = np.zeros((T, M), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path_arr = np.empty(T, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] ptr = ptr_arr
    cdef cnp.int64_t[::1] path = path_arr
    cdef cnp.ndarray[double, ndim=1] delta_arr = np.empty(M)
    cdef cnp.ndarray[double, ndim=1] nxt_arr = np.empty(M)
    cdef double[::1] delta = delta_arr
    cdef double[::1] nxt = nxt_arr
    cdef double best, v, score
    cdef Py_ssize_t t, i, j, arg
    with nogil:
        for j in range(M):
            delta[j] = emit[0, j]
        for t in range(1, T):
            for j in range(M):
                best = -INFINITY
                arg = 0
                for i in range(M):
                    v = delta[i] + trans_t[j, i]
                    if v > best:
                        best = v
                        arg = i
                ptr[t, j] = arg
                nxt[j] = emit[t, j] + best
            for j in range(M):
                delta[j] = nxt[j]
        best = -INFINITY
        arg = 0
        for j in range(M):
            if delta[j] > best:
                best = delta[j]
                arg = j
        score = best
        path[T - 1] = arg
        for t in range(T - 1, 0, -1):
            path[t - 1] = ptr[t, path[t]]
    return path_arr, float(score)
