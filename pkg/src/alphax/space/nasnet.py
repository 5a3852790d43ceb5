"""Two-cell (normal + reduction) block space.

Each cell holds up to ``max_blocks`` blocks; a block has a left and a right
branch of layers plus one input per branch. Input code 0 is the previous
cell, 1 the cell before that, and ``i + 2`` the output of block ``i``.

Each block encodes to six digits ``[L1, L2, R1, R2, left_in, right_in]``;
absent layers and absent blocks are zero. Because an empty new block fed by
``(0, 0)`` would encode exactly like an absent block, new blocks may not take
that input pair; every present block therefore has a non-zero digit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

from ..errors import MalformedEncoding
from .base import TERMINATE, SearchSpace, Terminate

LAYER_CODES = {
    1: "3x3 avg pool",
    2: "5x5 avg pool",
    3: "7x7 avg pool",
    4: "3x3 max pool",
    5: "5x5 max pool",
    6: "7x7 max pool",
    7: "3x3 conv",
    8: "5x5 conv",
    9: "identity",
    10: "3x3 depth-separable conv",
    11: "5x5 depth-separable conv",
    12: "7x7 depth-separable conv",
}
LAYER_NAMES = {name: code for code, name in LAYER_CODES.items()}

MAX_BLOCKS = 5
DIGITS_PER_BLOCK = 6
DIGITS_PER_BRANCH = 2
NORMAL, REDUCTION = 0, 1


@dataclass(frozen=True)
class AddLeftLayer:
    cell: int
    block: int
    layer: int

    def __str__(self):
        return f"AddLeftLayer({self.cell},{self.block},{self.layer})"


@dataclass(frozen=True)
class AddRightLayer:
    cell: int
    block: int
    layer: int

    def __str__(self):
        return f"AddRightLayer({self.cell},{self.block},{self.layer})"


@dataclass(frozen=True)
class NewBlock:
    cell: int
    left_input: int
    right_input: int

    def __str__(self):
        return f"NewBlock({self.cell},{self.left_input},{self.right_input})"


@dataclass(frozen=True)
class Block:
    left: tuple = ()
    right: tuple = ()
    left_input: int = 0
    right_input: int = 0


@dataclass(frozen=True)
class CellPairState:
    normal: tuple = ()
    reduction: tuple = ()
    terminal: bool = False

    @property
    def is_terminal(self) -> bool:
        return self.terminal

    @property
    def cells(self) -> tuple:
        return (self.normal, self.reduction)

    def with_cell(self, idx: int, blocks: tuple) -> "CellPairState":
        if idx == NORMAL:
            return CellPairState(blocks, self.reduction)
        return CellPairState(self.normal, blocks)


def _input_pairs(n_blocks: int):
    codes = range(n_blocks + 2)
    return [(l, r) for l in codes for r in codes if (l, r) != (0, 0)]


class NasNetSpace(SearchSpace):
    kind = "nasnet"
    encoding_length = 2 * MAX_BLOCKS * DIGITS_PER_BLOCK

    def __init__(self, max_blocks: int = 5, max_branch_layers: int = 1, n_layers: int = 12):
        if not 1 <= max_blocks <= MAX_BLOCKS:
            raise ValueError(f"max_blocks must lie in [1, {MAX_BLOCKS}]")
        if not 1 <= max_branch_layers <= DIGITS_PER_BRANCH:
            raise ValueError(f"max_branch_layers must lie in [1, {DIGITS_PER_BRANCH}]")
        if not 1 <= n_layers <= len(LAYER_CODES):
            raise ValueError("n_layers must lie in [1, 12]")
        self.max_blocks = int(max_blocks)
        self.max_branch_layers = int(max_branch_layers)
        self.n_layers = int(n_layers)

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "max_blocks": self.max_blocks,
            "max_branch_layers": self.max_branch_layers,
            "n_layers": self.n_layers,
        }

    @property
    def max_digit(self) -> int:
        return max(self.n_layers, MAX_BLOCKS + 1)

    @property
    def n_op_codes(self) -> int:
        return self.n_layers

    @property
    def max_walk_length(self) -> int:
        return 2 * self.max_blocks * (1 + 2 * self.max_branch_layers) + 1

    def initial_state(self) -> CellPairState:
        return CellPairState()

    def legal_actions(self, state: CellPairState) -> list:
        if state.terminal:
            return []
        cap = self.max_branch_layers
        layers = range(1, self.n_layers + 1)
        left, right, new = [], [], []
        for c, blocks in enumerate(state.cells):
            for b, blk in enumerate(blocks):
                if len(blk.left) < cap:
                    left.extend(AddLeftLayer(c, b, code) for code in layers)
                if len(blk.right) < cap:
                    right.extend(AddRightLayer(c, b, code) for code in layers)
            if len(blocks) < self.max_blocks:
                new.extend(NewBlock(c, l, r) for l, r in _input_pairs(len(blocks)))
        return left + right + new + [TERMINATE]

    def _apply(self, state: CellPairState, action) -> CellPairState:
        if isinstance(action, Terminate):
            return replace(state, terminal=True)
        blocks = state.cells[action.cell]
        if isinstance(action, NewBlock):
            blk = Block((), (), action.left_input, action.right_input)
            return state.with_cell(action.cell, blocks + (blk,))
        blk = blocks[action.block]
        if isinstance(action, AddLeftLayer):
            blk = replace(blk, left=blk.left + (action.layer,))
        else:
            blk = replace(blk, right=blk.right + (action.layer,))
        new_blocks = blocks[: action.block] + (blk,) + blocks[action.block + 1 :]
        return state.with_cell(action.cell, new_blocks)

    # -- encoding ----------------------------------------------------------
    @staticmethod
    def encode_block(blk: Block) -> list:
        pad = DIGITS_PER_BRANCH
        left = list(blk.left) + [0] * (pad - len(blk.left))
        right = list(blk.right) + [0] * (pad - len(blk.right))
        return left + right + [blk.left_input, blk.right_input]

    def encode(self, state: CellPairState) -> tuple:
        digits = []
        for blocks in state.cells:
            for b in range(MAX_BLOCKS):
                if b < len(blocks):
                    digits.extend(self.encode_block(blocks[b]))
                else:
                    digits.extend([0] * DIGITS_PER_BLOCK)
        return tuple(digits)

    def _decode_branch(self, digits) -> tuple:
        layers = []
        for pos, d in enumerate(digits):
            if d == 0:
                if any(digits[pos:]):
                    raise MalformedEncoding("layer padding precedes a present layer")
                break
            if d > self.n_layers:
                raise MalformedEncoding(f"layer code {d} outside [1, {self.n_layers}]")
            layers.append(d)
        if len(layers) > self.max_branch_layers:
            raise MalformedEncoding("branch exceeds the per-branch layer cap")
        return tuple(layers)

    def decode(self, vec, terminal: bool = False) -> CellPairState:
        d = self._check_vector(vec)
        cells = []
        per_cell = MAX_BLOCKS * DIGITS_PER_BLOCK
        for c in range(2):
            chunk = d[c * per_cell : (c + 1) * per_cell]
            blocks = []
            for b in range(MAX_BLOCKS):
                digits = chunk[b * DIGITS_PER_BLOCK : (b + 1) * DIGITS_PER_BLOCK]
                if not any(digits):
                    if any(chunk[(b + 1) * DIGITS_PER_BLOCK :]):
                        raise MalformedEncoding("absent block precedes a present block")
                    break
                if b >= self.max_blocks:
                    raise MalformedEncoding("cell exceeds the block limit")
                li, ri = digits[4], digits[5]
                if li > b + 1 or ri > b + 1:
                    raise MalformedEncoding(f"block {b} reads from a later block")
                if (li, ri) == (0, 0):
                    raise MalformedEncoding(f"block {b} has inputs (0, 0)")
                blocks.append(
                    Block(self._decode_branch(digits[0:2]), self._decode_branch(digits[2:4]), li, ri)
                )
            cells.append(tuple(blocks))
        return CellPairState(cells[0], cells[1], terminal)

    # -- enumeration -------------------------------------------------------
    def _branch_options(self):
        opts = [()]
        for n in range(1, self.max_branch_layers + 1):
            opts.extend(product(range(1, self.n_layers + 1), repeat=n))
        return opts

    def _cell_count(self) -> int:
        branch = len(self._branch_options())
        total, running = 1, 1
        for b in range(self.max_blocks):
            running *= len(_input_pairs(b)) * branch * branch
            total += running
        return total

    def count(self) -> int:
        return self._cell_count() ** 2

    def _cells(self):
        branches = self._branch_options()

        def grow(prefix):
            yield prefix
            if len(prefix) == self.max_blocks:
                return
            for (li, ri), lb, rb in product(_input_pairs(len(prefix)), branches, branches):
                yield from grow(prefix + (Block(tuple(lb), tuple(rb), li, ri),))

        return grow(())

    def _enumerate(self):
        for normal in self._cells():
            for reduction in self._cells():
                yield CellPairState(normal, reduction, True)

    # -- mutation ----------------------------------------------------------
    def mutate(self, state: CellPairState, rng) -> CellPairState:
        """One structural edit on a randomly chosen cell."""
        for _ in range(64):
            c = int(rng.integers(2))
            blocks = list(state.cells[c])
            edits = ["new_block"] if len(blocks) < self.max_blocks else []
            if blocks:
                edits += ["change_input", "remove_block"]
                if any(blk.left or blk.right for blk in blocks):
                    edits += ["change_layer", "remove_layer"]
                if any(
                    len(blk.left) < self.max_branch_layers or len(blk.right) < self.max_branch_layers
                    for blk in blocks
                ):
                    edits.append("add_layer")
            if not edits:
                continue
            edit = edits[int(rng.integers(len(edits)))]
            out = self._edit(blocks, edit, rng)
            if out is None:
                continue
            child = state.with_cell(c, tuple(out))
            child = replace(child, terminal=state.terminal)
            if child != state:
                return child
        raise RuntimeError("no mutation found")

    def _edit(self, blocks, edit, rng):
        n = len(blocks)
        cap = self.max_branch_layers
        if edit == "new_block":
            pairs = _input_pairs(n)
            li, ri = pairs[int(rng.integers(len(pairs)))]
            return blocks + [Block((), (), li, ri)]
        if edit == "remove_block":
            return blocks[:-1]
        if edit == "change_input":
            b = int(rng.integers(n))
            blk = blocks[b]
            pairs = [p for p in _input_pairs(b) if p != (blk.left_input, blk.right_input)]
            if not pairs:
                return None
            li, ri = pairs[int(rng.integers(len(pairs)))]
            blocks[b] = replace(blk, left_input=li, right_input=ri)
            return blocks
        slots = []
        for b, blk in enumerate(blocks):
            for side in ("left", "right"):
                branch = getattr(blk, side)
                if edit == "add_layer" and len(branch) < cap:
                    slots.append((b, side, len(branch)))
                elif edit in ("change_layer", "remove_layer"):
                    slots.extend((b, side, i) for i in range(len(branch)))
        b, side, i = slots[int(rng.integers(len(slots)))]
        branch = list(getattr(blocks[b], side))
        if edit == "add_layer":
            branch.append(int(rng.integers(1, self.n_layers + 1)))
        elif edit == "remove_layer":
            del branch[i]
        else:
            choices = [x for x in range(1, self.n_layers + 1) if x != branch[i]]
            if not choices:
                return None
            branch[i] = choices[int(rng.integers(len(choices)))]
        blocks[b] = replace(blocks[b], **{side: tuple(branch)})
        return blocks

    def structure(self, state: CellPairState):
        ops, edges, longest = [], 0, 0
        for blocks in state.cells:
            depth = []
            for blk in blocks:
                ops.extend(blk.left)
                ops.extend(blk.right)
                d = 1
                for inp in (blk.left_input, blk.right_input):
                    if inp >= 2:
                        edges += 1
                        d = max(d, depth[inp - 2] + 1)
                depth.append(d)
            longest = max([longest] + depth)
        return ops, edges, longest
