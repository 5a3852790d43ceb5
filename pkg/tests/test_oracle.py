import json
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphax.errors import InvalidArch, InvalidEncoding, MissingEntry, ParseError
from alphax.mcts import Tree
from alphax.oracle import (
    Evaluator,
    FunctionBackend,
    SyntheticBench,
    TabularBench,
    evaluate,
    find_transfer_parent,
    global_optimum,
    load_tabular,
    parse_oracle_spec,
    write_tabular,
)
from alphax.space import ConvNetSpace, NasBenchSpace, NasNetSpace

DAG4 = NasBenchSpace(max_nodes=4, ops=("a", "b"))


def _longest_path(n, edges):
    @lru_cache(None)
    def depth(j):
        preds = [i for (i, k) in edges if k == j]
        return max((depth(i) + 1 for i in preds), default=0)

    return max((depth(j) for j in range(n)), default=0)


def _closed_form(bench, state):
    """Independent evaluation of the noiseless synthetic score on a DAG."""
    n = len(state.ops) + 2
    return (
        bench.base
        + sum(bench.op_weights[o] for o in state.ops)
        + bench.edge_bonus * len(state.edges)
        - bench.depth_penalty * _longest_path(n, frozenset(state.edges))
    )


# -- synthetic ----------------------------------------------------------------------


def test_empty_dag_scores_base():
    sp = NasBenchSpace()
    b = SyntheticBench(sp, 0, noise_scale=0.0)
    empty = sp.terminate(sp.initial_state())
    assert b.accuracy(empty) == pytest.approx(0.3)
    assert SyntheticBench(sp, 0, noise_scale=0.0, base=1.7).accuracy(empty) == 1.0
    assert SyntheticBench(sp, 0, noise_scale=0.0, base=-0.2).accuracy(empty) == 0.0


def test_determinism_and_range():
    sp = NasBenchSpace(max_nodes=5)
    a, b = SyntheticBench(sp, 4), SyntheticBench(sp, 4)
    for st_ in list(sp.enumerate(cap=30_000))[::97]:
        x = a.accuracy(st_)
        assert x == b.accuracy(st_) == a.accuracy(sp.encode(st_))
        assert 0.0 <= x <= 1.0
        assert abs(x - a.score(sp.encode(st_))) <= 0.01 + 1e-12


def test_seed_changes_landscape():
    sp = NasBenchSpace(max_nodes=4)
    archs = list(sp.enumerate())[:50]
    assert [SyntheticBench(sp, 1).accuracy(s) for s in archs] != [
        SyntheticBench(sp, 2).accuracy(s) for s in archs
    ]


def test_matches_independent_closed_form():
    b = SyntheticBench(DAG4, 3, noise_scale=0.0)
    for s in DAG4.enumerate():
        assert b.accuracy(s) == pytest.approx(min(1, max(0, _closed_form(b, s))), abs=1e-12)


def test_argmax_matches_closed_form_argmax():
    b = SyntheticBench(DAG4, 3, noise_scale=0.0)
    states = list(DAG4.enumerate())
    scores = [_closed_form(b, s) for s in states]
    top = max(scores)
    expected = min(DAG4.encode(s) for s, v in zip(states, scores) if v == top)
    opt, acc = global_optimum(b, DAG4)
    assert DAG4.encode(opt) == expected
    assert acc == pytest.approx(top, abs=1e-12)


@pytest.mark.parametrize("space", [NasNetSpace(max_blocks=1), ConvNetSpace(max_depth=2)], ids=repr)
def test_other_spaces_valid_range(space):
    b = SyntheticBench(space, 0)
    for s in list(space.enumerate(cap=300_000))[::211]:
        assert 0.0 <= b.accuracy(s) <= 1.0


def test_invalid_arch_rejected():
    b = SyntheticBench(NasBenchSpace(), 0)
    with pytest.raises(InvalidArch):
        b.accuracy((1,) * 56)
    with pytest.raises(InvalidArch):
        b.accuracy((0,) * 3)


# -- evaluation accounting --------------------------------------------------------------


def test_epochs_and_cache():
    sp = NasBenchSpace()
    ev = Evaluator(SyntheticBench(sp, 0))
    x = sp.encode(sp.terminate(sp.initial_state()))
    r = evaluate(ev, x, None)
    assert r.epochs_charged == 70
    again = evaluate(ev, x, x)
    assert again.accuracy == r.accuracy and again.epochs_charged == 0
    y = sp.encode(sp.terminate(sp.apply(sp.initial_state(), sp.legal_actions(sp.initial_state())[0])))
    assert evaluate(ev, y, x).epochs_charged == 20
    assert ev.total_epochs == 90 and ev.n_scratch == 1 and ev.n_transfer == 1


@settings(max_examples=60, deadline=None)
@given(plan=st.lists(st.tuples(st.integers(0, 40), st.booleans()), max_size=60))
def test_total_epochs_formula(plan):
    states = list(DAG4.enumerate())
    ev = Evaluator(SyntheticBench(DAG4, 0))
    for idx, has_parent in plan:
        evaluate(ev, DAG4.encode(states[idx]), (0,) * 56 if has_parent else None)
    assert ev.total_epochs == 70 * ev.n_scratch + 20 * ev.n_transfer
    assert ev.n_scratch + ev.n_transfer == len({i for i, _ in plan})


def test_evaluator_state_round_trip():
    ev = Evaluator(SyntheticBench(DAG4, 0))
    for s in list(DAG4.enumerate())[:5]:
        ev.evaluate(DAG4.encode(s))
    ev2 = Evaluator(ev.backend)
    ev2.load_state(json.loads(json.dumps(ev.state_dict())))
    assert ev2.cache == ev.cache and ev2.total_epochs == ev.total_epochs == 350


# -- tabular ----------------------------------------------------------------------------


def _entries(n=3):
    sp = NasBenchSpace()
    states = list(NasBenchSpace(max_nodes=3).enumerate())[:n]
    return sp, [(sp.encode(s), 0.1 + 0.2 * i) for i, s in enumerate(states)]


def test_tabular_round_trip(tmp_path):
    sp, entries = _entries(3)
    p = tmp_path / "t.jsonl"
    write_tabular(p, sp, entries)
    bench = load_tabular(p)
    assert len(bench) == 3 and bench.meta["entries"] == 3
    assert bench.space.kind == "nasbench"
    for enc, acc in entries:
        assert bench.accuracy(enc) == acc
    absent = sp.encode(list(NasBenchSpace(max_nodes=4).enumerate())[-1])
    with pytest.raises(MissingEntry):
        bench.accuracy(absent)


def _write_lines(path, lines):
    path.write_text("\n".join(json.dumps(x) if not isinstance(x, str) else x for x in lines) + "\n")


def test_tabular_errors_name_lines(tmp_path):
    sp, entries = _entries(2)
    rows = [{"encoding": list(e), "accuracy": a} for e, a in entries]
    p = tmp_path / "bad.jsonl"

    _write_lines(p, [rows[0], {"encoding": rows[1]["encoding"], "accuracy": 1.2}])
    with pytest.raises(ParseError) as ei:
        load_tabular(p)
    assert ei.value.line == 2 and "line 2" in str(ei.value)

    _write_lines(p, [rows[0], rows[1], dict(rows[0], accuracy=0.99)])
    with pytest.raises(ParseError) as ei:
        load_tabular(p)
    assert ei.value.line == 3

    _write_lines(p, [rows[0], rows[0], rows[1]])
    assert len(load_tabular(p)) == 2

    _write_lines(p, [rows[0], "{not json"])
    with pytest.raises(ParseError) as ei:
        load_tabular(p)
    assert ei.value.line == 2

    _write_lines(p, [rows[0], {"encoding": [1] * 56, "accuracy": 0.5}])
    with pytest.raises(InvalidEncoding) as ei:
        load_tabular(p)
    assert ei.value.line == 2 and "[1, 1" in str(ei.value)


def _linear_scan(table):
    best = None
    for enc in sorted(table):
        if best is None or table[enc] > table[best]:
            best = enc
    return best


@settings(max_examples=50, deadline=None)
@given(accs=st.lists(st.sampled_from([0.1, 0.25, 0.5, 0.75, 0.9]), min_size=1, max_size=40))
def test_tabular_optimum_matches_linear_scan(accs):
    states = list(DAG4.enumerate())
    table = {DAG4.encode(s): a for s, a in zip(states, accs)}
    opt, acc = global_optimum(TabularBench(DAG4, table), DAG4)
    assert DAG4.encode(opt) == _linear_scan(table)
    assert acc == max(accs)


def test_constant_oracle_optimum_is_smallest():
    opt, acc = global_optimum(FunctionBackend(DAG4, lambda e: 0.5), DAG4)
    assert acc == 0.5
    assert DAG4.encode(opt) == min(DAG4.encode(s) for s in DAG4.enumerate())


def test_parse_oracle_spec(tmp_path):
    sp = NasBenchSpace()
    assert parse_oracle_spec("synthetic:5", sp).seed == 5
    _, entries = _entries(2)
    write_tabular(tmp_path / "x.jsonl", sp, entries)
    assert len(parse_oracle_spec(f"tabular:{tmp_path / 'x.jsonl'}", sp)) == 2
    for bad in ("synthetic:x", "oracle:1", "tabular:"):
        with pytest.raises(ValueError):
            parse_oracle_spec(bad, sp)


# -- transfer parent --------------------------------------------------------------------


def _hamming(a, b):
    return sum(x != y for x, y in zip(a, b))


def test_transfer_parent_examples():
    tree = Tree(DAG4)
    root = tree.root
    child = tree.expand(root, 0)
    target = (0,) * 10
    assert find_transfer_parent(child, target) is None
    root.evaluated.append((0, (1, 1, 1) + (0,) * 7))
    assert find_transfer_parent(child, target) == (1, 1, 1) + (0,) * 7
    child.evaluated.append((1, (1,) + (0,) * 9))
    assert find_transfer_parent(child, target) == (1,) + (0,) * 9
    # equal distance: most recently evaluated wins
    root.evaluated.append((2, (0,) * 9 + (5,)))
    assert find_transfer_parent(child, target) == (0,) * 9 + (5,)
    # siblings are not ancestors
    other = tree.expand(root, 1)
    other.evaluated.append((3, target))
    assert find_transfer_parent(child, target) == (0,) * 9 + (5,)


@settings(max_examples=100, deadline=None)
@given(
    cands=st.lists(st.tuples(st.integers(0, 2), st.lists(st.integers(0, 3), min_size=6, max_size=6)), max_size=12),
    target=st.lists(st.integers(0, 3), min_size=6, max_size=6),
)
def test_transfer_parent_exhaustive(cands, target):
    tree = Tree(DAG4)
    chain = [tree.root]
    for _ in range(2):
        chain.append(tree.expand(chain[-1], 0))
    for order, (lvl, enc) in enumerate(cands):
        chain[lvl].evaluated.append((order, tuple(enc)))
    got = find_transfer_parent(chain[-1], tuple(target))
    if not cands:
        assert got is None
        return
    best = min(range(len(cands)), key=lambda i: (_hamming(cands[i][1], target), -i))
    assert got == tuple(cands[best][1])
