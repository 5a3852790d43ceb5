"""Sequential ConvNets: up to ``max_depth`` conv layers, each with a stride,
filter count, kernel size and activation.

Encoding: four digits per layer (1-based option index of stride, filters,
kernel, activation), zero for absent layers.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

from ..errors import MalformedEncoding
from .base import TERMINATE, SearchSpace, Terminate

MAX_DEPTH = 3
DIGITS_PER_LAYER = 4
HYPER_FIELDS = ("stride", "filters", "kernel")


@dataclass(frozen=True)
class ConvLayer:
    stride: int
    filters: int
    kernel: int
    activation: str


@dataclass(frozen=True)
class AddConvLayer:
    stride: int
    filters: int
    kernel: int
    activation: str

    def __str__(self):
        return f"AddConvLayer({self.stride},{self.filters},{self.kernel},{self.activation})"


@dataclass(frozen=True)
class SetActivation:
    layer: int
    activation: str

    def __str__(self):
        return f"SetActivation({self.layer},{self.activation})"


@dataclass(frozen=True)
class ChangeHyper:
    layer: int
    field: str
    value: int

    def __str__(self):
        return f"ChangeHyper({self.layer},{self.field},{self.value})"


@dataclass(frozen=True)
class ConvNetState:
    layers: tuple = ()
    terminal: bool = False

    @property
    def is_terminal(self) -> bool:
        return self.terminal


class ConvNetSpace(SearchSpace):
    kind = "convnet"
    encoding_length = MAX_DEPTH * DIGITS_PER_LAYER

    def __init__(
        self,
        max_depth: int = 3,
        strides: tuple = (1, 2),
        filters: tuple = (32, 64),
        kernels: tuple = (2, 4),
        activations: tuple = ("relu", "tanh", "sigmoid"),
    ):
        if not 1 <= max_depth <= MAX_DEPTH:
            raise ValueError(f"max_depth must lie in [1, {MAX_DEPTH}]")
        self.max_depth = int(max_depth)
        self.options = {
            "stride": tuple(strides),
            "filters": tuple(filters),
            "kernel": tuple(kernels),
            "activation": tuple(activations),
        }
        if any(len(v) == 0 for v in self.options.values()):
            raise ValueError("every hyperparameter needs at least one option")
        self._variants = [
            ConvLayer(*combo) for combo in product(strides, filters, kernels, activations)
        ]
        self._variant_code = {v: i + 1 for i, v in enumerate(self._variants)}

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "max_depth": self.max_depth,
            "strides": list(self.options["stride"]),
            "filters": list(self.options["filters"]),
            "kernels": list(self.options["kernel"]),
            "activations": list(self.options["activation"]),
        }

    @property
    def max_digit(self) -> int:
        return max(len(v) for v in self.options.values())

    @property
    def n_op_codes(self) -> int:
        return len(self._variants)

    @property
    def max_walk_length(self) -> int:
        return 8 * self.max_depth + 8

    def initial_state(self) -> ConvNetState:
        return ConvNetState()

    def legal_actions(self, state: ConvNetState) -> list:
        if state.terminal:
            return []
        acts: list = []
        if len(state.layers) < self.max_depth:
            acts.extend(AddConvLayer(*(getattr(v, f) for f in ("stride", "filters", "kernel", "activation")))
                        for v in self._variants)
        for i, layer in enumerate(state.layers):
            acts.extend(
                SetActivation(i, a) for a in self.options["activation"] if a != layer.activation
            )
        for i, layer in enumerate(state.layers):
            for f in HYPER_FIELDS:
                acts.extend(ChangeHyper(i, f, v) for v in self.options[f] if v != getattr(layer, f))
        acts.append(TERMINATE)
        return acts

    def _apply(self, state: ConvNetState, action) -> ConvNetState:
        if isinstance(action, Terminate):
            return replace(state, terminal=True)
        layers = list(state.layers)
        if isinstance(action, AddConvLayer):
            layers.append(ConvLayer(action.stride, action.filters, action.kernel, action.activation))
        elif isinstance(action, SetActivation):
            layers[action.layer] = replace(layers[action.layer], activation=action.activation)
        else:
            layers[action.layer] = replace(layers[action.layer], **{action.field: action.value})
        return ConvNetState(tuple(layers))

    # -- encoding ----------------------------------------------------------
    def encode(self, state: ConvNetState) -> tuple:
        digits = []
        for i in range(MAX_DEPTH):
            if i < len(state.layers):
                layer = state.layers[i]
                digits.extend(
                    self.options[f].index(getattr(layer, f)) + 1
                    for f in ("stride", "filters", "kernel", "activation")
                )
            else:
                digits.extend([0] * DIGITS_PER_LAYER)
        return tuple(digits)

    def decode(self, vec, terminal: bool = False) -> ConvNetState:
        d = self._check_vector(vec)
        layers = []
        fields = ("stride", "filters", "kernel", "activation")
        for i in range(MAX_DEPTH):
            chunk = d[i * DIGITS_PER_LAYER : (i + 1) * DIGITS_PER_LAYER]
            if not any(chunk):
                if any(d[(i + 1) * DIGITS_PER_LAYER :]):
                    raise MalformedEncoding("absent layer precedes a present layer")
                break
            if i >= self.max_depth:
                raise MalformedEncoding("network exceeds the depth limit")
            values = []
            for f, digit in zip(fields, chunk):
                opts = self.options[f]
                if not 1 <= digit <= len(opts):
                    raise MalformedEncoding(f"{f} index {digit} outside [1, {len(opts)}]")
                values.append(opts[digit - 1])
            layers.append(ConvLayer(*values))
        return ConvNetState(tuple(layers), terminal)

    # -- enumeration -------------------------------------------------------
    def count(self) -> int:
        v = len(self._variants)
        return sum(v**d for d in range(self.max_depth + 1))

    def _enumerate(self):
        for depth in range(self.max_depth + 1):
            for layers in product(self._variants, repeat=depth):
                yield ConvNetState(tuple(layers), True)

    # -- mutation ----------------------------------------------------------
    def mutate(self, state: ConvNetState, rng) -> ConvNetState:
        """Change one hyperparameter, or add / remove one layer."""
        layers = list(state.layers)
        edits = []
        if len(layers) < self.max_depth:
            edits.append("add")
        if layers:
            edits.append("remove")
            edits.extend(
                f for f in HYPER_FIELDS + ("activation",) if len(self.options[f]) > 1
            )
        edit = edits[int(rng.integers(len(edits)))]
        if edit == "add":
            pos = int(rng.integers(len(layers) + 1))
            layers.insert(pos, self._variants[int(rng.integers(len(self._variants)))])
        elif edit == "remove":
            del layers[int(rng.integers(len(layers)))]
        else:
            i = int(rng.integers(len(layers)))
            current = getattr(layers[i], edit)
            choices = [v for v in self.options[edit] if v != current]
            layers[i] = replace(layers[i], **{edit: choices[int(rng.integers(len(choices)))]})
        return ConvNetState(tuple(layers), state.terminal)

    def structure(self, state: ConvNetState):
        ops = [self._variant_code[layer] for layer in state.layers]
        return ops, max(0, len(ops) - 1), len(ops)
