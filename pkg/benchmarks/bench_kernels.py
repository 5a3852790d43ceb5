"""Time the compiled kernels against their pure-Python versions.

    python3 benchmarks/bench_kernels.py [repeats]
"""
import sys
import timeit

import numpy as np

from alphax import kernels
from alphax.space import NasBenchSpace


def cases():
    rng = np.random.default_rng(0)
    q = rng.random(40)
    n = rng.integers(1, 50, size=40).astype(np.int64)
    space = NasBenchSpace(max_nodes=6)
    enc = np.asarray(space.encode(space.initial_state()), dtype=np.int64)
    u = rng.random(space.max_walk_length)
    full = np.asarray(space.rollout_encoding(space.initial_state(), lambda: u), dtype=np.int64)
    cands = rng.integers(0, 6, size=(2000, 56)).astype(np.int64)
    return {
        "ucb_select": lambda k: k.ucb_select(q, n, 0.5),
        "dag_walk": lambda k: k.dag_walk(enc, 6, space.n_ops, u),
        "dag_structure": lambda k: k.dag_structure(full),
        "hamming_many": lambda k: k.hamming_many(cands, full),
    }


def main(repeats: int = 2000):
    impls = {"python": kernels.fallback}
    if kernels.compiled is not None:
        impls["cython"] = kernels.compiled
    print(f"{'kernel':<15}" + "".join(f"{name:>14}" for name in impls) + "   (us per call)")
    for name, fn in cases().items():
        row = []
        for impl in impls.values():
            t = min(timeit.repeat(lambda: fn(impl), number=repeats, repeat=3)) / repeats
            row.append(f"{t * 1e6:14.2f}")
        print(f"{name:<15}" + "".join(row))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
