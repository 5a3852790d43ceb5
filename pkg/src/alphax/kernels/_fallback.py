"""Pure-Python versions of the compiled kernels (same arithmetic, same order)."""
import math

import numpy as np

SLOTS = 7
NODE_BASE = 49


def ucb_select(q_sum, visits, c):
    total = 0.0
    for i, v in enumerate(visits):
        if v == 0:
            return i
        total += v
    best, best_score = 0, 0.0
    log_total = math.log(total)
    for i in range(len(visits)):
        n = float(visits[i])
        score = q_sum[i] / n + 2.0 * c * math.sqrt(2.0 * log_total / n)
        if i == 0 or score > best_score:
            best_score, best = score, i
    return best


def dag_walk(enc, max_nodes, n_ops, uniforms):
    out = [int(x) for x in enc]
    output_code = n_ops + 2
    n = 0
    while n < SLOTS and out[NODE_BASE + n] != 0:
        n += 1
    t = 0
    while True:
        if t >= len(uniforms):
            raise ValueError("uniform block exhausted")
        node_acts = n_ops if n < max_nodes else 0
        free = [(i, j) for i in range(n) for j in range(i + 1, n) if out[i * SLOTS + j] == 0]
        a = node_acts + len(free) + 1
        idx = int(uniforms[t] * a)
        t += 1
        if idx < node_acts:
            for i in range(n - 1):
                if out[i * SLOTS + n - 1]:
                    out[i * SLOTS + n - 1] = 0
                    out[i * SLOTS + n] = 1
            out[NODE_BASE + n - 1] = idx + 1
            out[NODE_BASE + n] = output_code
            n += 1
        elif idx < node_acts + len(free):
            i, j = free[idx - node_acts]
            out[i * SLOTS + j] = 1
        else:
            return np.array(out, dtype=np.int64)


def dag_structure(enc):
    n = 0
    while n < SLOTS and enc[NODE_BASE + n] != 0:
        n += 1
    longest = [0] * n
    edges = 0
    for j in range(n):
        for i in range(j):
            if enc[i * SLOTS + j]:
                edges += 1
                longest[j] = max(longest[j], longest[i] + 1)
    return edges, max(longest, default=0)


def hamming_many(cands, target):
    cands = np.asarray(cands)
    return np.count_nonzero(cands != np.asarray(target)[None, :], axis=1).astype(np.int64)
