"""Compiled kernels agree with the pure-Python versions and with the space API."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphax import kernels
from alphax.space import NasBenchSpace

IMPLS = [pytest.param(kernels.fallback, id="python")]
if kernels.compiled is not None:
    IMPLS.append(pytest.param(kernels.compiled, id="cython"))


def ucb_reference(q, n, c):
    if any(v == 0 for v in n):
        return list(n).index(0)
    N = sum(n)
    scores = [q[i] / n[i] + 2 * c * math.sqrt(2 * math.log(N) / n[i]) for i in range(len(n))]
    return scores.index(max(scores))


def walk_reference(space, state, uniforms):
    """Random walk through legal_actions, one uniform per step."""
    for u in uniforms:
        acts = space.legal_actions(state)
        state = space._apply(state, acts[int(u * len(acts))])
        if state.terminal:
            return space.encode(state)
    raise AssertionError("uniforms exhausted")


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=200, deadline=None)
@given(
    data=st.lists(st.tuples(st.floats(-5, 5), st.integers(0, 50)), min_size=1, max_size=12),
    c=st.floats(0.01, 3),
)
def test_ucb_select_matches_reference(impl, data, c):
    q = np.array([d[0] for d in data], dtype=np.float64)
    n = np.array([d[1] for d in data], dtype=np.int64)
    got = impl.ucb_select(q, n, c)
    want = ucb_reference(q.tolist(), n.tolist(), c)
    if got != want:  # only ulp-level ties may differ
        N = n.sum()
        s = lambda i: q[i] / n[i] + 2 * c * math.sqrt(2 * math.log(N) / n[i])
        assert s(got) == pytest.approx(s(want), abs=1e-12)


@pytest.mark.parametrize("impl", IMPLS)
def test_ucb_select_prefers_unvisited_lowest_index(impl):
    q = np.array([9.0, 0.0, 0.0, 0.0])
    n = np.array([3, 1, 0, 0], dtype=np.int64)
    assert impl.ucb_select(q, n, 0.5) == 2


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), max_nodes=st.integers(2, 6))
def test_dag_walk_matches_legal_action_walk(impl, seed, max_nodes):
    space = NasBenchSpace(max_nodes=max_nodes)
    rng = np.random.default_rng(seed)
    state = space.random_state(rng)
    if state.terminal:
        state = space.initial_state()
    u = rng.random(space.max_walk_length)
    enc = np.asarray(space.encode(state), dtype=np.int64)
    got = impl.dag_walk(enc, space.max_nodes, space.n_ops, u)
    assert tuple(got.tolist()) == walk_reference(space, state, u)


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_dag_structure_matches_state_structure(impl, seed):
    space = NasBenchSpace(max_nodes=6)
    state = space.terminate(space.random_state(np.random.default_rng(seed)))
    _, n_edges, longest = space.structure(state)
    enc = np.asarray(space.encode(state), dtype=np.int64)
    assert tuple(int(x) for x in impl.dag_structure(enc)) == (n_edges, longest)


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=100, deadline=None)
@given(rows=st.integers(1, 20), cols=st.integers(1, 40), seed=st.integers(0, 1000))
def test_hamming_many(impl, rows, cols, seed):
    rng = np.random.default_rng(seed)
    cands = rng.integers(0, 3, size=(rows, cols)).astype(np.int64)
    target = rng.integers(0, 3, size=cols).astype(np.int64)
    want = [sum(int(a != b) for a, b in zip(row, target)) for row in cands.tolist()]
    assert np.asarray(impl.hamming_many(cands, target)).tolist() == want


def test_backend_name_reports_active_implementation():
    assert kernels.BACKEND_NAME in ("cython", "python")
    assert (kernels.BACKEND_NAME == "cython") == (kernels.compiled is not None)
