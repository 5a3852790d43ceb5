# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay arithmetic-for-arithmetic identical to
``_fallback.py``; the test suite cross-checks both."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()

DEF SLOTS = 7
DEF NODE_BASE = 49


def ucb_select(const double[::1] q_sum, const cnp.int64_t[::1] visits, double c):
    cdef Py_ssize_t k = q_sum.shape[0], i, best = 0
    cdef double total = 0.0, score, best_score = 0.0, n
    for i in range(k):
        if visits[i] == 0:
            return i
        total += visits[i]
    for i in range(k):
        n = <double>visits[i]
        score = q_sum[i] / n + 2.0 * c * sqrt(2.0 * log(total) / n)
        if i == 0 or score > best_score:
            best_score = score
            best = i
    return best


def dag_walk(const cnp.int64_t[::1] enc, int max_nodes, int n_ops, const double[::1] uniforms):
    out_arr = np.array(enc, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef int n = 0, t = 0, i, j, k, a, node_acts, absent, idx
    cdef int output_code = n_ops + 2
    while n < SLOTS and out[NODE_BASE + n] != 0:
        n += 1
    while True:
        if t >= uniforms.shape[0]:
            raise ValueError("uniform block exhausted")
        node_acts = n_ops if n < max_nodes else 0
        absent = 0
        for i in range(n):
            for j in range(i + 1, n):
                if out[i * SLOTS + j] == 0:
                    absent += 1
        a = node_acts + absent + 1
        idx = <int>(uniforms[t] * a)
        t += 1
        if idx < node_acts:
            for i in range(n - 1):
                if out[i * SLOTS + n - 1] != 0:
                    out[i * SLOTS + n - 1] = 0
                    out[i * SLOTS + n] = 1
            out[NODE_BASE + n - 1] = idx + 1
            out[NODE_BASE + n] = output_code
            n += 1
        elif idx < node_acts + absent:
            k = idx - node_acts
            for i in range(n):
                for j in range(i + 1, n):
                    if out[i * SLOTS + j] == 0:
                        if k == 0:
                            out[i * SLOTS + j] = 1
                        k -= 1
        else:
            return out_arr


def dag_structure(const cnp.int64_t[::1] enc):
    cdef int n = 0, i, j, edges = 0, best = 0
    cdef int longest[SLOTS]
    while n < SLOTS and enc[NODE_BASE + n] != 0:
        n += 1
    for j in range(n):
        longest[j] = 0
        for i in range(j):
            if enc[i * SLOTS + j] != 0:
                edges += 1
                if longest[i] + 1 > longest[j]:
                    longest[j] = longest[i] + 1
        if longest[j] > best:
            best = longest[j]
    return edges, best


def hamming_many(const cnp.int64_t[:, ::1] cands, const cnp.int64_t[::1] target):
    cdef Py_ssize_t m = cands.shape[0], d = cands.shape[1], r, c
    cdef cnp.int64_t cnt
    out_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    with nogil:
        for r in range(m):
            cnt = 0
            for c in range(d):
                cnt += cands[r, c] != target[c]
            out[r] = cnt
    return out_arr
