"""Shared machinery for the search spaces.

A space is an immutable configuration object. States and actions are frozen
value types, so every operation here is a pure function and safe to call from
any thread.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import IllegalAction, MalformedEncoding, SpaceMismatch, SpaceTooLarge

Encoding = tuple  # fixed-length tuple of small non-negative ints

DEFAULT_ENUMERATION_CAP = 2_000_000


@dataclass(frozen=True)
class Terminate:
    """Freeze the architecture; the resulting state is absorbing."""

    def __str__(self):
        return "Terminate()"


TERMINATE = Terminate()


class SearchSpace:
    """Base class; subclasses define states, actions and the digit encoding."""

    kind: str = ""
    encoding_length: int = 0

    # -- construction / identity -------------------------------------------
    def config(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.config() == other.config()

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.config().items()))))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "kind")
        return f"{type(self).__name__}({args})"

    # -- state machine -----------------------------------------------------
    def initial_state(self):
        raise NotImplementedError

    def legal_actions(self, state) -> list:
        raise NotImplementedError

    def _apply(self, state, action):
        """Apply without the legality check (callers guarantee legality)."""
        raise NotImplementedError

    def apply(self, state, action):
        if action not in self.legal_actions(state):
            raise IllegalAction(f"{action} is not legal in this state")
        return self._apply(state, action)

    def terminate(self, state):
        return state if state.is_terminal else self._apply(state, TERMINATE)

    # -- encoding ----------------------------------------------------------
    @property
    def max_digit(self) -> int:
        raise NotImplementedError

    def encode(self, state) -> Encoding:
        raise NotImplementedError

    def decode(self, vec: Sequence[int], terminal: bool = False):
        raise NotImplementedError

    def _check_vector(self, vec) -> tuple:
        try:
            digits = tuple(int(d) for d in vec)
        except (TypeError, ValueError) as exc:
            raise MalformedEncoding(f"non-integer digit in encoding: {exc}") from None
        if len(digits) != self.encoding_length:
            raise MalformedEncoding(
                f"expected {self.encoding_length} digits, got {len(digits)}"
            )
        if any(d < 0 or d > self.max_digit for d in digits):
            raise MalformedEncoding(f"digit outside [0, {self.max_digit}]")
        return digits

    def features(self, vectors) -> np.ndarray:
        """Scale encodings into [0, 1] for the surrogate input layer."""
        arr = np.asarray(vectors, dtype=np.float64)
        return arr / float(self.max_digit)

    # -- enumeration -------------------------------------------------------
    def count(self) -> int:
        """Number of distinct terminal architectures in the space."""
        raise NotImplementedError

    def _enumerate(self) -> Iterator:
        raise NotImplementedError

    def enumerate(self, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator:
        n = self.count()
        if n > cap:
            raise SpaceTooLarge(f"{n} architectures exceeds the enumeration cap {cap}")
        return self._enumerate()

    # -- stochastic helpers ------------------------------------------------
    @property
    def max_walk_length(self) -> int:
        """Uniform draws reserved per random walk (refilled if a walk runs longer)."""
        raise NotImplementedError

    def mutate(self, state, rng: np.random.Generator):
        raise NotImplementedError

    def random_state(self, rng: np.random.Generator, stop_prob: float = 0.15):
        """A random reachable state; terminal with probability ``stop_prob``."""
        s = self.initial_state()
        while True:
            acts = [a for a in self.legal_actions(s) if a is not TERMINATE]
            if not acts or rng.random() < stop_prob:
                return self.terminate(s) if rng.random() < 0.5 else s
            s = self._apply(s, acts[int(rng.integers(len(acts)))])

    # -- oracle support ----------------------------------------------------
    @property
    def n_op_codes(self) -> int:
        raise NotImplementedError

    def structure(self, state) -> tuple[list[int], int, int]:
        """(op codes present, edge count, longest path) used by synthetic oracles."""
        raise NotImplementedError

    def structure_of(self, encoding) -> tuple[list[int], int, int]:
        return self.structure(self.decode(encoding, terminal=True))

    def rollout_encoding(self, state, uniforms) -> tuple:
        """Encoding of ``walk(self, state, uniforms)``; spaces may override
        with a compiled walk that consumes the draws identically."""
        return self.encode(walk(self, state, uniforms))


def walk(space: SearchSpace, state, uniforms) -> tuple:
    """Uniform random walk to a terminal state.

    ``uniforms`` is a callable returning a fresh block of ``max_walk_length``
    draws in [0, 1). Step ``t`` picks ``actions[floor(u_t * len(actions))]``.
    A state that is already terminal consumes no draws.
    """
    if state.is_terminal:
        return state
    block = uniforms()
    t = 0
    while not state.is_terminal:
        if t == len(block):
            block, t = uniforms(), 0
        actions = space.legal_actions(state)
        state = space._apply(state, actions[int(block[t] * len(actions))])
        t += 1
    return state


def edit_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Hamming distance between two encodings of the same space."""
    if len(a) != len(b):
        raise SpaceMismatch(f"encodings of length {len(a)} and {len(b)}")
    return sum(1 for x, y in zip(a, b) if x != y)
