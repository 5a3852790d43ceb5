"""Accuracy predictor: a from-scratch MLP and the multi-stage ensemble.

Parameters of each network live in one flat float64 vector; the per-layer
weight matrices and biases are views into it, which keeps Adam, snapshots
and finite-difference checks simple.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateVariance, DimensionMismatch

FULL_HIDDEN = (512, 2048, 2048, 512)


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 2e-5
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 0.1
    seed: int = 0
    # cap on mini-batch steps per fit; None runs every epoch in full
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class Mlp:
    """Fully connected net: ReLU hidden layers, sigmoid (``n_out == 1``) or
    softmax head."""

    def __init__(self, dims, rng=None, init_scale: float = 0.1):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"bad layer dims {dims}")
        self.dims = dims
        self.shapes = [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        size = sum(a * b + b for a, b in self.shapes)
        self.theta = np.zeros(size)
        if rng is not None:
            self.theta[:] = rng.uniform(-init_scale, init_scale, size)
        self._bind()
        self.adam_m = np.zeros(size)
        self.adam_v = np.zeros(size)
        self.adam_t = 0

    def _bind(self):
        self.weights, self.biases = [], []
        off = 0
        for a, b in self.shapes:
            self.weights.append(self.theta[off : off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(self.theta[off : off + b])
            off += b

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def n_out(self) -> int:
        return self.dims[-1]

    def set_params(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.theta.shape:
            raise DimensionMismatch(f"expected {self.theta.size} parameters, got {theta.size}")
        self.theta[:] = theta

    # -- forward / backward -------------------------------------------------
    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatch(f"expected input width {self.input_dim}, got {X.shape[-1]}")
        return X

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        return acts

    def _head(self, z):
        if self.n_out == 1:
            return 1.0 / (1.0 + np.exp(-z[:, 0]))
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def forward(self, X) -> np.ndarray:
        """Sigmoid output of shape (n,) or softmax probabilities (n, n_out)."""
        return self._head(self._forward(self._check(X))[-1])

    def loss(self, X, y) -> float:
        X = self._check(X)
        out = self.forward(X)
        if self.n_out == 1:
            return float(np.mean((out - np.asarray(y, dtype=np.float64)) ** 2))
        y = np.asarray(y, dtype=np.int64)
        return float(-np.mean(np.log(out[np.arange(len(y)), y] + 1e-300)))

    def gradient(self, X, y):
        """Loss and flat gradient: MSE for the sigmoid head, cross-entropy for
        softmax (``y`` then holds class labels)."""
        X = self._check(X)
        acts = self._forward(X)
        out = self._head(acts[-1])
        n = X.shape[0]
        if self.n_out == 1:
            y = np.asarray(y, dtype=np.float64)
            r = out - y
            loss = float(np.mean(r * r))
            delta = (2.0 / n) * (r * out * (1.0 - out))[:, None]
        else:
            y = np.asarray(y, dtype=np.int64)
            loss = float(-np.mean(np.log(out[np.arange(n), y] + 1e-300)))
            delta = out.copy()
            delta[np.arange(n), y] -= 1.0
            delta /= n
        grad = np.empty_like(self.theta)
        offs = []
        off = 0
        for a, b in self.shapes:
            offs.append(off)
            off += a * b + b
        for i in range(len(self.weights) - 1, -1, -1):
            a, b = self.shapes[i]
            o = offs[i]
            grad[o : o + a * b] = (acts[i].T @ delta).ravel()
            grad[o + a * b : o + a * b + b] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return loss, grad

    def unflatten(self, flat):
        """Split a flat vector into per-layer (W, b) arrays."""
        out, off = [], 0
        for a, b in self.shapes:
            W = flat[off : off + a * b].reshape(a, b)
            off += a * b
            out.append((W, flat[off : off + b]))
            off += b
        return out

    # -- training -----------------------------------------------------------
    def adam_step(self, grad, cfg: TrainConfig):
        # bias corrections folded into the step size; same update as the
        # textbook form lr * mhat / (sqrt(vhat) + eps). Overwrites ``grad``.
        self.adam_t += 1
        t = self.adam_t
        m, v = self.adam_m, self.adam_v
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * grad
        v *= cfg.beta2
        np.multiply(grad, grad, out=grad)
        grad *= 1.0 - cfg.beta2
        v += grad
        c2 = np.sqrt(1.0 - cfg.beta2**t)
        lr_t = cfg.learning_rate * c2 / (1.0 - cfg.beta1**t)
        denom = np.sqrt(v)
        denom += cfg.eps * c2
        np.divide(m, denom, out=denom)
        denom *= lr_t
        self.theta -= denom

    def fit(self, X, y, cfg: TrainConfig, rng, rows=None) -> int:
        """Shuffled mini-batch Adam; continues from the current weights and
        optimizer state. ``rows`` restricts training to a subset of ``X``.
        Returns the number of steps taken."""
        X = self._check(X)
        y = np.asarray(y)
        rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows)
        n = len(rows)
        if n == 0:
            raise ValueError("cannot train on an empty sample set")
        steps = 0
        for _ in range(cfg.epochs):
            order = rows[rng.permutation(n)]
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                _, g = self.gradient(X[idx], y[idx])
                self.adam_step(g, cfg)
                steps += 1
                if cfg.max_steps is not None and steps >= cfg.max_steps:
                    return steps
        return steps

    # -- persistence ----------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "theta": self.theta.copy(),
            "adam_m": self.adam_m.copy(),
            "adam_v": self.adam_v.copy(),
            "adam_t": self.adam_t,
        }

    @classmethod
    def from_state(cls, st: dict) -> "Mlp":
        m = cls(st["dims"])
        m.set_params(st["theta"])
        m.adam_m[:] = st["adam_m"]
        m.adam_v[:] = st["adam_v"]
        m.adam_t = int(st["adam_t"])
        return m


def mlp_forward(model: Mlp, x) -> np.ndarray:
    return model.forward(x)


def mlp_backward(model: Mlp, X, y):
    """Per-layer (dW, db) gradients of the batch MSE."""
    _, g = model.gradient(X, y)
    return model.unflatten(g)


def train(model: Mlp, X, y, cfg: TrainConfig, rng=None) -> Mlp:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    model.fit(X, y, cfg, rng)
    return model


def stage_of(acc, stages: int):
    """Half-open quarter (or 1/S) ranges; 1.0 belongs to the top stage."""
    s = np.floor(np.asarray(acc, dtype=np.float64) * stages).astype(np.int64)
    return np.clip(s, 0, stages - 1)


@dataclass
class MultiStageModel:
    """Router classifier plus one regressor per accuracy range."""

    input_dim: int
    hidden: tuple = FULL_HIDDEN
    stages: int = 4
    seed: int = 0
    init_scale: float = 0.1
    router: Mlp = field(init=False, repr=False)
    experts: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.stages < 2:
            raise ValueError("need at least two stages")
        self.hidden = tuple(int(h) for h in self.hidden)
        ss = np.random.SeedSequence(self.seed)
        init_seq, train_seq = ss.spawn(2)
        init_rngs = [np.random.default_rng(s) for s in init_seq.spawn(self.stages + 1)]
        # one shuffling stream per sub-model so experts never see each other's data
        self.rngs = [np.random.default_rng(s) for s in train_seq.spawn(self.stages + 1)]
        dims = (self.input_dim,) + self.hidden
        self.router = Mlp(dims + (self.stages,), init_rngs[0], self.init_scale)
        self.experts = [Mlp(dims + (1,), r, self.init_scale) for r in init_rngs[1:]]
        self.expert_seen = [False] * self.stages
        self.acc_sum = 0.0
        self.acc_count = 0

    @property
    def fallback(self) -> float:
        return self.acc_sum / self.acc_count if self.acc_count else 0.5

    def observe(self, acc: float):
        """Running mean used when the router picks an untrained expert."""
        self.acc_sum += float(acc)
        self.acc_count += 1

    def fit(self, X, y, cfg: TrainConfig):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(y) == 0:
            raise ValueError("cannot train on an empty sample set")
        labels = stage_of(y, self.stages)
        self.router.fit(X, labels, cfg, self.rngs[0])
        for s in range(self.stages):
            rows = np.flatnonzero(labels == s)
            if len(rows):
                self.experts[s].fit(X, y, cfg, self.rngs[s + 1], rows)
                self.expert_seen[s] = True

    def route(self, X) -> np.ndarray:
        return np.argmax(self.router.forward(X), axis=1)

    def predict(self, X) -> np.ndarray:
        X = self.router._check(X)
        stage = self.route(X)
        out = np.empty(X.shape[0])
        for s in np.unique(stage):
            rows = stage == s
            if self.expert_seen[s]:
                out[rows] = np.clip(self.experts[s].forward(X[rows]), 0.0, 1.0)
            else:
                out[rows] = self.fallback
        return out

    def state_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "stages": self.stages,
            "seed": self.seed,
            "init_scale": self.init_scale,
            "router": self.router.state_dict(),
            "experts": [e.state_dict() for e in self.experts],
            "expert_seen": list(self.expert_seen),
            "acc_sum": self.acc_sum,
            "acc_count": self.acc_count,
            "rngs": [r.bit_generator.state for r in self.rngs],
        }

    @classmethod
    def from_state(cls, st: dict) -> "MultiStageModel":
        ms = cls.__new__(cls)
        ms.input_dim = int(st["input_dim"])
        ms.hidden = tuple(st["hidden"])
        ms.stages = int(st["stages"])
        ms.seed = st["seed"]
        ms.init_scale = st["init_scale"]
        ms.router = Mlp.from_state(st["router"])
        ms.experts = [Mlp.from_state(e) for e in st["experts"]]
        ms.expert_seen = [bool(v) for v in st["expert_seen"]]
        ms.acc_sum = float(st["acc_sum"])
        ms.acc_count = int(st["acc_count"])
        ms.rngs = []
        for state in st["rngs"]:
            r = np.random.default_rng()
            r.bit_generator.state = state
            ms.rngs.append(r)
        return ms


def multistage_train(ms: MultiStageModel, X, y, cfg: TrainConfig) -> MultiStageModel:
    ms.fit(X, y, cfg)
    return ms


def predict(ms: MultiStageModel, X) -> np.ndarray:
    return ms.predict(X)


class ConstantPredictor:
    """Ablation stand-in: every architecture gets the running-mean accuracy."""

    def __init__(self):
        self.acc_sum = 0.0
        self.acc_count = 0

    def observe(self, acc: float):
        self.acc_sum += float(acc)
        self.acc_count += 1

    def predict(self, X) -> np.ndarray:
        n = np.asarray(X).shape[0]
        value = self.acc_sum / self.acc_count if self.acc_count else 0.5
        return np.full(n, value)

    def fit(self, X, y, cfg=None):
        pass

    def state_dict(self) -> dict:
        return {"acc_sum": self.acc_sum, "acc_count": self.acc_count}

    @classmethod
    def from_state(cls, st: dict) -> "ConstantPredictor":
        p = cls()
        p.acc_sum = float(st["acc_sum"])
        p.acc_count = int(st["acc_count"])
        return p


def pearson_correlation(preds, truths) -> float:
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    dp, dt = p - p.mean(), t - t.mean()
    sp, st = float(np.sqrt(dp @ dp)), float(np.sqrt(dt @ dt))
    if sp == 0.0 or st == 0.0:
        raise DegenerateVariance("correlation undefined for a constant sequence")
    return float(np.clip((dp @ dt) / (sp * st), -1.0, 1.0))
