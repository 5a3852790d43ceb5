"""Evaluation backends standing in for network training.

A backend maps a terminal architecture's encoding to an accuracy in [0, 1].
``Evaluator`` wraps a backend with the result cache and epoch accounting
(70 epochs from scratch, 20 when a trained parent can be transferred).
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    InvalidArch,
    InvalidEncoding,
    MalformedEncoding,
    MissingEntry,
    ParseError,
)
from .space import SPACES, SearchSpace, make_space

SCRATCH_EPOCHS = 70
TRANSFER_EPOCHS = 20


@dataclass(frozen=True)
class EvalRecord:
    encoding: tuple
    accuracy: float
    epochs_charged: int
    transfer_parent: tuple | None = None


def _as_encoding(space: SearchSpace, arch) -> tuple:
    if hasattr(arch, "is_terminal"):
        return space.encode(arch)
    return tuple(int(d) for d in arch)


# -- backends ---------------------------------------------------------------


class SyntheticBench:
    """Closed-form accuracy with a structural signal and hashed noise.

    acc = clamp(base + sum(op weights) + edge_bonus*|E| - depth_penalty*L + eta)
    where ``eta`` is a pure function of (seed, encoding) in [-noise, noise].
    """

    def __init__(
        self,
        space: SearchSpace,
        seed: int = 0,
        base: float = 0.3,
        op_weight_range: tuple = (0.0, 0.08),
        edge_bonus: float = 0.02,
        depth_penalty: float = 0.03,
        noise_scale: float = 0.01,
        op_weights: dict | None = None,
    ):
        self.space = space
        self.seed = int(seed)
        self.base = float(base)
        self.edge_bonus = float(edge_bonus)
        self.depth_penalty = float(depth_penalty)
        self.noise_scale = float(noise_scale)
        if op_weights is None:
            lo, hi = op_weight_range
            w = np.random.default_rng(self.seed).uniform(lo, hi, space.n_op_codes)
            op_weights = {code + 1: float(x) for code, x in enumerate(w)}
        self.op_weights = {int(k): float(v) for k, v in op_weights.items()}

    def config(self) -> dict:
        return {
            "kind": "synthetic",
            "seed": self.seed,
            "base": self.base,
            "edge_bonus": self.edge_bonus,
            "depth_penalty": self.depth_penalty,
            "noise_scale": self.noise_scale,
            "op_weights": {str(k): v for k, v in sorted(self.op_weights.items())},
        }

    def noise(self, encoding) -> float:
        if self.noise_scale == 0.0:
            return 0.0
        payload = struct.pack(f"<q{len(encoding)}q", self.seed, *encoding)
        h = hashlib.blake2b(payload, digest_size=8).digest()
        u = struct.unpack("<Q", h)[0] / 2.0**64
        return self.noise_scale * (2.0 * u - 1.0)

    def score(self, encoding) -> float:
        """Unclamped noiseless structural score."""
        ops, n_edges, longest = self.space.structure_of(encoding)
        return (
            self.base
            + math.fsum(self.op_weights.get(op, 0.0) for op in ops)
            + self.edge_bonus * n_edges
            - self.depth_penalty * longest
        )

    def accuracy(self, arch) -> float:
        enc = _as_encoding(self.space, arch)
        try:
            s = self.score(enc)
        except MalformedEncoding as exc:
            raise InvalidArch(str(exc)) from None
        return min(1.0, max(0.0, s + self.noise(enc)))

    __call__ = accuracy


class TabularBench:
    """Lookup table of precomputed accuracies."""

    def __init__(self, space: SearchSpace, table: dict, meta: dict | None = None):
        self.space = space
        self.table = dict(table)
        self.meta = dict(meta or {})
        self.meta.setdefault("space", space.kind)
        self.meta["entries"] = len(self.table)

    def __len__(self):
        return len(self.table)

    def config(self) -> dict:
        return {"kind": "tabular", "entries": len(self.table), "meta": self.meta}

    def accuracy(self, arch) -> float:
        enc = _as_encoding(self.space, arch)
        try:
            return self.table[enc]
        except KeyError:
            raise MissingEntry(f"no table entry for {list(enc)}") from None

    __call__ = accuracy


class FunctionBackend:
    """Wrap an arbitrary ``encoding -> accuracy`` callable (tests, custom landscapes)."""

    def __init__(self, space: SearchSpace, fn, name: str = "function"):
        self.space = space
        self.fn = fn
        self.name = name

    def config(self) -> dict:
        return {"kind": self.name}

    def accuracy(self, arch) -> float:
        return float(self.fn(_as_encoding(self.space, arch)))

    __call__ = accuracy


def _space_for(meta: dict, length: int, space: SearchSpace | None) -> SearchSpace:
    if space is not None:
        return space
    cfg = meta.get("space_config")
    if isinstance(cfg, dict):
        from .space import space_from_config

        return space_from_config(cfg)
    kind = meta.get("space")
    if kind in SPACES:
        return make_space(kind)
    for kind, cls in SPACES.items():
        if cls.encoding_length == length:
            return cls()
    raise ParseError(f"cannot infer a search space for encodings of length {length}")


def load_tabular(path, space: SearchSpace | None = None) -> TabularBench:
    """Read a JSON Lines table: optional ``{"meta": {...}}`` header, then one
    ``{"encoding": [...], "accuracy": x}`` object per line."""
    meta: dict = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno)
            if "meta" in obj and not rows and not meta:
                if not isinstance(obj["meta"], dict):
                    raise ParseError("meta must be an object", lineno)
                meta = obj["meta"]
                continue
            enc, acc = obj.get("encoding"), obj.get("accuracy")
            if not isinstance(enc, list) or not all(
                isinstance(d, int) and not isinstance(d, bool) for d in enc
            ):
                raise ParseError("encoding must be an array of integers", lineno)
            if isinstance(acc, bool) or not isinstance(acc, (int, float)):
                raise ParseError("accuracy must be a number", lineno)
            acc = float(acc)
            if not 0.0 <= acc <= 1.0:
                raise ParseError(f"accuracy {acc} outside [0, 1]", lineno)
            rows.append((lineno, tuple(enc), acc))
    if not rows:
        raise ParseError("table has no entries")
    space = _space_for(meta, len(rows[0][1]), space)
    table: dict = {}
    for lineno, enc, acc in rows:
        try:
            space.decode(enc)
        except MalformedEncoding as exc:
            raise InvalidEncoding(f"encoding {list(enc)}: {exc}", lineno) from None
        if enc in table and table[enc] != acc:
            raise ParseError(
                f"duplicate encoding with conflicting accuracy ({table[enc]} vs {acc})", lineno
            )
        table[enc] = acc
    return TabularBench(space, table, meta)


def write_tabular(path, space: SearchSpace, entries, meta: dict | None = None):
    """Inverse of ``load_tabular``; ``entries`` yields (encoding, accuracy)."""
    entries = list(entries)
    header = {"space": space.kind, "space_config": space.config(), "entries": len(entries)}
    header.update(meta or {})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"meta": header}) + "\n")
        for enc, acc in entries:
            fh.write(json.dumps({"encoding": [int(d) for d in enc], "accuracy": float(acc)}) + "\n")


def parse_oracle_spec(spec: str, space: SearchSpace):
    """``synthetic:<seed>`` or ``tabular:<path>``."""
    kind, _, arg = spec.partition(":")
    if kind == "synthetic":
        try:
            seed = int(arg) if arg else 0
        except ValueError:
            raise ValueError(f"bad synthetic seed in {spec!r}") from None
        return SyntheticBench(space, seed)
    if kind == "tabular" and arg:
        return load_tabular(arg, space)
    raise ValueError(f"oracle must be synthetic:<seed> or tabular:<path>, got {spec!r}")


# -- evaluation with cache and cost accounting --------------------------------


@dataclass
class Evaluator:
    """Caches accuracies by encoding and charges training epochs.

    ``backend`` may be None on a master that only records results computed
    elsewhere.
    """

    backend: object = None
    scratch_epochs: int = SCRATCH_EPOCHS
    transfer_epochs: int = TRANSFER_EPOCHS
    cache: dict = field(default_factory=dict)
    total_epochs: int = 0
    n_scratch: int = 0
    n_transfer: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def epochs_for(self, transfer_parent) -> int:
        return self.scratch_epochs if transfer_parent is None else self.transfer_epochs

    def __contains__(self, enc) -> bool:
        return enc in self.cache

    def record(self, enc: tuple, accuracy: float, transfer_parent=None) -> EvalRecord:
        """Store an externally computed result; repeats charge nothing."""
        with self._lock:
            if enc in self.cache:
                return EvalRecord(enc, self.cache[enc], 0, transfer_parent)
            epochs = self.epochs_for(transfer_parent)
            self.cache[enc] = float(accuracy)
            self.total_epochs += epochs
            if transfer_parent is None:
                self.n_scratch += 1
            else:
                self.n_transfer += 1
            return EvalRecord(enc, float(accuracy), epochs, transfer_parent)

    def evaluate(self, arch, transfer_parent=None) -> EvalRecord:
        enc = tuple(arch)
        with self._lock:
            if enc in self.cache:
                return EvalRecord(enc, self.cache[enc], 0, transfer_parent)
        acc = self.backend.accuracy(enc)
        return self.record(enc, acc, transfer_parent)

    def state_dict(self) -> dict:
        return {
            "cache": [[list(k), v] for k, v in self.cache.items()],
            "total_epochs": self.total_epochs,
            "n_scratch": self.n_scratch,
            "n_transfer": self.n_transfer,
        }

    def load_state(self, st: dict):
        self.cache = {tuple(k): float(v) for k, v in st["cache"]}
        self.total_epochs = int(st["total_epochs"])
        self.n_scratch = int(st["n_scratch"])
        self.n_transfer = int(st["n_transfer"])


def evaluate(evaluator: Evaluator, arch, transfer_parent=None) -> EvalRecord:
    return evaluator.evaluate(arch, transfer_parent)


def global_optimum(backend, space: SearchSpace, cap: int | None = None):
    """Exhaustive maximizer; ties go to the lexicographically smallest encoding."""
    if isinstance(backend, TabularBench):
        items = backend.table.items()
    else:
        kw = {} if cap is None else {"cap": cap}
        items = ((enc, backend.accuracy(enc)) for enc in map(space.encode, space.enumerate(**kw)))
    best_enc, best_acc = None, -math.inf
    for enc, acc in items:
        if acc > best_acc or (acc == best_acc and enc < best_enc):
            best_enc, best_acc = enc, acc
    if best_enc is None:
        raise ValueError("nothing to maximize over")
    return space.decode(best_enc, terminal=True), best_acc


def find_transfer_parent(node, encoding) -> tuple | None:
    """Nearest (Hamming) previously evaluated architecture hanging off
    ``node`` or one of its ancestors.

    Nodes expose ``parent`` and ``evaluated``, a list of (order, encoding)
    pairs. Ties on distance go to the most recently evaluated.
    """
    cands = []
    while node is not None:
        cands.extend(node.evaluated)
        node = node.parent
    if not cands:
        return None
    encs = np.asarray([c[1] for c in cands], dtype=np.int64)
    dist = kernels.hamming_many(encs, np.asarray(encoding, dtype=np.int64))
    best = min(range(len(cands)), key=lambda i: (int(dist[i]), -cands[i][0]))
    return tuple(cands[best][1])
