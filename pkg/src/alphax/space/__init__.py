"""Search spaces: states, actions, encodings and enumeration."""
from .base import (
    DEFAULT_ENUMERATION_CAP,
    TERMINATE,
    SearchSpace,
    Terminate,
    edit_distance,
    walk,
)
from .convnet import AddConvLayer, ChangeHyper, ConvLayer, ConvNetSpace, ConvNetState, SetActivation
from .nasbench import AddEdge, AddNode, DagState, NasBenchSpace
from .nasnet import (
    LAYER_CODES,
    LAYER_NAMES,
    AddLeftLayer,
    AddRightLayer,
    Block,
    CellPairState,
    NasNetSpace,
    NewBlock,
)

SPACES = {
    "nasnet": NasNetSpace,
    "nasbench": NasBenchSpace,
    "convnet": ConvNetSpace,
}


def make_space(kind: str, **limits) -> SearchSpace:
    try:
        cls = SPACES[kind]
    except KeyError:
        raise ValueError(f"unknown space {kind!r}; expected one of {sorted(SPACES)}") from None
    return cls(**limits)


def space_from_config(cfg: dict) -> SearchSpace:
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    for key in ("ops", "strides", "filters", "kernels", "activations"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    return make_space(kind, **cfg)


def initial_state(space: SearchSpace):
    return space.initial_state()


def legal_actions(space: SearchSpace, state) -> list:
    return space.legal_actions(state)


def apply(space: SearchSpace, state, action):
    return space.apply(state, action)


def encode(space: SearchSpace, state) -> tuple:
    return space.encode(state)


def decode(space: SearchSpace, vec, terminal: bool = False):
    return space.decode(vec, terminal)


def enumerate_space(space: SearchSpace, cap: int = DEFAULT_ENUMERATION_CAP):
    return space.enumerate(cap)


__all__ = [
    "AddConvLayer",
    "AddEdge",
    "AddLeftLayer",
    "AddNode",
    "AddRightLayer",
    "Block",
    "CellPairState",
    "ChangeHyper",
    "ConvLayer",
    "ConvNetSpace",
    "ConvNetState",
    "DagState",
    "DEFAULT_ENUMERATION_CAP",
    "LAYER_CODES",
    "LAYER_NAMES",
    "NasBenchSpace",
    "NasNetSpace",
    "NewBlock",
    "SearchSpace",
    "SetActivation",
    "SPACES",
    "TERMINATE",
    "Terminate",
    "apply",
    "decode",
    "edit_distance",
    "encode",
    "enumerate_space",
    "initial_state",
    "legal_actions",
    "make_space",
    "space_from_config",
    "walk",
]
