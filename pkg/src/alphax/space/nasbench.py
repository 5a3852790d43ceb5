"""Small cell DAGs in the style of the NASBench-101 benchmark.

Node 0 is the input, the last node the output, and intermediate nodes carry
an operation code. Edges always point from a lower to a higher node index
(the benchmark's upper-triangular convention), which makes every state
acyclic by construction. New nodes are inserted just before the output.

Encoding: the 7x7 adjacency matrix flattened row-major, followed by the
7-slot node list; unused rows, columns and slots are zero.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product
from math import comb

import numpy as np

from .. import kernels
from ..errors import MalformedEncoding
from .base import TERMINATE, SearchSpace, Terminate

SLOTS = 7
DEFAULT_OPS = ("conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3")


@dataclass(frozen=True)
class AddNode:
    op: int

    def __str__(self):
        return f"AddNode({self.op})"


@dataclass(frozen=True)
class AddEdge:
    src: int
    dst: int

    def __str__(self):
        return f"AddEdge({self.src},{self.dst})"


@dataclass(frozen=True)
class DagState:
    ops: tuple = ()
    edges: frozenset = frozenset()
    terminal: bool = False

    @property
    def is_terminal(self) -> bool:
        return self.terminal

    @property
    def n_nodes(self) -> int:
        return len(self.ops) + 2


class NasBenchSpace(SearchSpace):
    kind = "nasbench"
    encoding_length = SLOTS * SLOTS + SLOTS

    def __init__(self, max_nodes: int = 6, ops: tuple = DEFAULT_OPS):
        if not 2 <= max_nodes <= SLOTS:
            raise ValueError(f"max_nodes must lie in [2, {SLOTS}]")
        if len(ops) < 1:
            raise ValueError("at least one operation is required")
        self.max_nodes = int(max_nodes)
        self.ops = tuple(ops)
        self.n_ops = len(self.ops)
        self.input_code = self.n_ops + 1
        self.output_code = self.n_ops + 2

    def config(self) -> dict:
        return {"kind": self.kind, "max_nodes": self.max_nodes, "ops": list(self.ops)}

    @property
    def max_digit(self) -> int:
        return self.output_code

    @property
    def n_op_codes(self) -> int:
        return self.n_ops

    @property
    def max_walk_length(self) -> int:
        n = self.max_nodes
        return (n - 2) + comb(n, 2) + 1

    def initial_state(self) -> DagState:
        return DagState()

    def legal_actions(self, state: DagState) -> list:
        if state.terminal:
            return []
        n = state.n_nodes
        acts: list = []
        if n < self.max_nodes:
            acts.extend(AddNode(op) for op in range(1, self.n_ops + 1))
        edges = state.edges
        acts.extend(
            AddEdge(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges
        )
        acts.append(TERMINATE)
        return acts

    def _apply(self, state: DagState, action) -> DagState:
        if isinstance(action, Terminate):
            return replace(state, terminal=True)
        if isinstance(action, AddNode):
            out = state.n_nodes - 1
            edges = frozenset((i, j + 1 if j == out else j) for i, j in state.edges)
            return DagState(state.ops + (action.op,), edges)
        return DagState(state.ops, state.edges | {(action.src, action.dst)})

    # -- encoding ----------------------------------------------------------
    def encode(self, state: DagState) -> tuple:
        digits = [0] * self.encoding_length
        for i, j in state.edges:
            digits[i * SLOTS + j] = 1
        nodes = (self.input_code,) + state.ops + (self.output_code,)
        digits[SLOTS * SLOTS : SLOTS * SLOTS + len(nodes)] = nodes
        return tuple(digits)

    def decode(self, vec, terminal: bool = False) -> DagState:
        d = self._check_vector(vec)
        nodes = d[SLOTS * SLOTS :]
        n = 0
        while n < SLOTS and nodes[n] != 0:
            n += 1
        if any(nodes[n:]):
            raise MalformedEncoding("node list has a gap before a present node")
        if n < 2 or nodes[0] != self.input_code or nodes[n - 1] != self.output_code:
            raise MalformedEncoding("node list must start with input and end with output")
        if n > self.max_nodes:
            raise MalformedEncoding(f"{n} nodes exceeds the limit {self.max_nodes}")
        ops = nodes[1 : n - 1]
        if any(not 1 <= op <= self.n_ops for op in ops):
            raise MalformedEncoding("intermediate node carries an invalid op code")
        edges = []
        for i in range(SLOTS):
            for j in range(SLOTS):
                v = d[i * SLOTS + j]
                if v == 0:
                    continue
                if v != 1:
                    raise MalformedEncoding("adjacency digits must be 0 or 1")
                if i >= n or j >= n:
                    raise MalformedEncoding("edge touches an absent node")
                if i >= j:
                    raise MalformedEncoding(f"edge {i}->{j} breaks the topological order (cycle)")
                edges.append((i, j))
        return DagState(tuple(ops), frozenset(edges), terminal)

    # -- enumeration -------------------------------------------------------
    def count(self) -> int:
        k = self.n_ops
        return sum(k**m * 2 ** comb(m + 2, 2) for m in range(self.max_nodes - 1))

    def _enumerate(self):
        for m in range(self.max_nodes - 1):
            n = m + 2
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            for ops in product(range(1, self.n_ops + 1), repeat=m):
                for mask in range(1 << len(pairs)):
                    edges = frozenset(p for b, p in enumerate(pairs) if mask >> b & 1)
                    yield DagState(ops, edges, True)

    # -- mutation ----------------------------------------------------------
    def mutate(self, state: DagState, rng) -> DagState:
        """One structural edit: change an op, flip an edge, add or remove a node."""
        n = state.n_nodes
        m = len(state.ops)
        kinds = ["flip_edge"]
        if m and self.n_ops > 1:
            kinds.append("change_op")
        if n < self.max_nodes:
            kinds.append("add_node")
        if m:
            kinds.append("remove_node")
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "flip_edge":
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            p = pairs[int(rng.integers(len(pairs)))]
            edges = state.edges - {p} if p in state.edges else state.edges | {p}
            return replace(state, edges=edges)
        if kind == "change_op":
            idx = int(rng.integers(m))
            choices = [o for o in range(1, self.n_ops + 1) if o != state.ops[idx]]
            ops = list(state.ops)
            ops[idx] = choices[int(rng.integers(len(choices)))]
            return replace(state, ops=tuple(ops))
        if kind == "add_node":
            op = int(rng.integers(1, self.n_ops + 1))
            grown = self._apply(DagState(state.ops, state.edges), AddNode(op))
            return replace(grown, terminal=state.terminal)
        r = int(rng.integers(1, m + 1))
        edges = frozenset(
            (i - (i > r), j - (j > r)) for i, j in state.edges if i != r and j != r
        )
        ops = state.ops[: r - 1] + state.ops[r:]
        return DagState(ops, edges, state.terminal)

    def structure(self, state: DagState):
        n = state.n_nodes
        longest = [0] * n
        for j in range(n):
            for i in range(j):
                if (i, j) in state.edges and longest[i] + 1 > longest[j]:
                    longest[j] = longest[i] + 1
        return list(state.ops), len(state.edges), max(longest)

    def structure_of(self, encoding):
        enc = self._check_vector(encoding)
        self.decode(enc)  # validation only
        n_edges, longest = kernels.dag_structure(np.asarray(enc, dtype=np.int64))
        nodes = enc[SLOTS * SLOTS :]
        ops = [op for op in nodes[1:] if 0 < op <= self.n_ops]
        return ops, int(n_edges), int(longest)

    def rollout_encoding(self, state, uniforms) -> tuple:
        if state.terminal:
            return self.encode(state)
        enc = np.asarray(self.encode(state), dtype=np.int64)
        block = np.ascontiguousarray(uniforms(), dtype=np.float64)
        # one block always suffices: a walk is at most max_walk_length steps
        return tuple(kernels.dag_walk(enc, self.max_nodes, self.n_ops, block).tolist())
