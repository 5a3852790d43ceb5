"""Experiment configuration: TOML file plus command-line overrides."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .space import SPACES, make_space

ALGOS = ("alphax", "alphax-no-metadnn", "mcts-plain", "rs", "re", "ql", "hc")
ENGINE_ALGOS = ("alphax", "alphax-no-metadnn", "mcts-plain")

# desk-scale limits used when a space is picked without explicit limits
DEFAULT_LIMITS = {"nasbench": {"max_nodes": 5}, "nasnet": {}, "convnet": {}}


@dataclass
class SurrogateSettings:
    hidden: tuple = (16, 64, 64, 16)
    stages: int = 4
    learning_rate: float = 3e-3
    batch_size: int = 128
    max_steps: int | None = 4
    epochs: int = 20
    retrain_every: int = 1
    init_scale: float = 0.1


@dataclass
class ExperimentConfig:
    space: str = "nasbench"
    limits: dict | None = None
    oracle: str = "synthetic:0"
    algo: str = "alphax"
    trials: int = 200
    budget: int | None = None  # None: the size of the space
    c: float = 0.1
    k: int = 10
    seed: int = 0
    P: int = 50
    T: int = 10
    transfer: bool = True
    out: str = "runs"
    snapshot_every: int = 0
    workers: int = 0  # 0: sequential engine; N: N in-process workers
    listen: str | None = None
    master: str | None = None
    stale_timeout: float = 60.0
    # a trial ends (optimum not reached) after this many iterations without a new sample
    stall_limit: int = 100_000
    surrogate: SurrogateSettings = field(default_factory=SurrogateSettings)

    def __post_init__(self):
        if isinstance(self.surrogate, dict):
            self.surrogate = SurrogateSettings(**self.surrogate)
        self.surrogate.hidden = tuple(self.surrogate.hidden)
        if self.limits is None:
            self.limits = dict(DEFAULT_LIMITS.get(self.space, {}))
        self.validate()

    def validate(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown space {self.space!r}; expected one of {sorted(SPACES)}")
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}; expected one of {list(ALGOS)}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not self.oracle or self.oracle.count(":") < 1:
            raise ValueError("exactly one oracle spec, synthetic:<seed> or tabular:<path>, is required")
        if self.stall_limit < 1:
            raise ValueError("stall_limit must be at least 1")
        if self.c <= 0 or self.k < 1:
            raise ValueError("need c > 0 and k >= 1")
        if sum(bool(x) for x in (self.workers, self.listen, self.master)) > 1:
            raise ValueError("--workers, --listen and --master are mutually exclusive")

    def make_space(self):
        return make_space(self.space, **self.limits)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["surrogate"]["hidden"] = list(self.surrogate.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**d)


def load_config(path) -> dict:
    """Read a TOML file into a flat dict of ExperimentConfig fields.

    A ``[space]`` table may carry ``kind`` plus the space limits and a
    ``[surrogate]`` table the surrogate settings.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    out = {k: v for k, v in raw.items() if k not in ("space", "surrogate")}
    sp = raw.get("space")
    if isinstance(sp, dict):
        sp = dict(sp)
        if "kind" in sp:
            out["space"] = sp.pop("kind")
        out["limits"] = sp
    elif sp is not None:
        out["space"] = sp
    if "surrogate" in raw:
        out["surrogate"] = raw["surrogate"]
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """File values first, then non-None overrides (the command line)."""
    values = dict(file_values or {})
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "space" and v != values.get("space") and "limits" not in (overrides or {}):
            values.pop("limits", None)
        values[k] = v
    return ExperimentConfig.from_dict(values)
