"""Surrogate-assisted UCT search over a space's action tree.

One iteration: select down the tree with UCB1, expand one child, roll out
once for real evaluation (sim 0) and ``k`` more times for the surrogate,
then back the blended value up the traversed path. In distributed use the
backup is split in two: the surrogate estimate goes up immediately with a
visit, and a visit-free correction follows when the real accuracy arrives.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels, snapshot
from .errors import EmptyPredictions, UnknownArch
from .oracle import Evaluator, find_transfer_parent
from .space import SearchSpace, space_from_config
from .surrogate import ConstantPredictor, MultiStageModel, TrainConfig

INF = math.inf


@dataclass
class SearchConfig:
    c: float = 0.5
    k: int = 10
    max_tree_depth: int | None = None  # None: the space's longest action sequence
    max_episodes: int | None = None
    rng_seed: int = 0
    retrain_every: int = 1

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("exploration constant c must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.retrain_every < 1:
            raise ValueError("retrain_every must be at least 1")


PRESETS = {
    "default": dict(c=0.5, k=10),
    "nasbench": dict(c=2.0, k=10),
}


class TreeNode:
    __slots__ = (
        "id", "state", "actions", "q_sum", "visits", "children",
        "parent", "incoming", "depth", "evaluated", "_enc", "q_final", "n_pending",
    )

    def __init__(self, node_id: int, state, actions: list, parent=None, incoming=None):
        self.id = node_id
        self.state = state
        self.actions = actions
        self.q_sum = np.zeros(len(actions))
        self.visits = np.zeros(len(actions), dtype=np.int64)
        # q_final sums finalized rewards only; once an edge has no preemptive
        # estimate outstanding, q_sum is reset to it so that the two-phase
        # update leaves exactly the sums a sequential run would hold
        self.q_final = np.zeros(len(actions))
        self.n_pending = np.zeros(len(actions), dtype=np.int64)
        self.children: dict = {}
        self.parent = parent
        self.incoming = incoming
        self.depth = 0 if parent is None else parent.depth + 1
        # (sample order, encoding) of archs evaluated from rollouts rooted here
        self.evaluated: list = []
        self._enc = None

    @property
    def n(self) -> int:
        return int(self.visits.sum())

    def mean_q(self, a: int):
        v = int(self.visits[a])
        return float(self.q_sum[a]) / v if v else None

    @property
    def value(self):
        """Mean Q on the parent edge leading here (None when unvisited)."""
        if self.parent is None:
            n = self.n
            return float(self.q_sum.sum()) / n if n else None
        return self.parent.mean_q(self.incoming)


class Tree:
    def __init__(self, space: SearchSpace):
        self.space = space
        root_state = space.initial_state()
        self.root = TreeNode(0, root_state, space.legal_actions(root_state))
        self.nodes = [self.root]

    def __len__(self):
        return len(self.nodes)

    def expand(self, node: TreeNode, a: int) -> TreeNode:
        if a in node.children:
            raise ValueError(f"action {a} of node {node.id} is already expanded")
        state = self.space._apply(node.state, node.actions[a])
        child = TreeNode(len(self.nodes), state, self.space.legal_actions(state), node, a)
        node.children[a] = child
        self.nodes.append(child)
        return child


# -- pure operations -----------------------------------------------------------


def ucb_score(q_sum: float, n_sa: int, n_s: int, c: float) -> float:
    if n_sa == 0:
        return INF
    return q_sum / n_sa + 2.0 * c * math.sqrt(2.0 * math.log(n_s) / n_sa)


def select(tree: Tree, c: float, max_depth: int | None = None) -> list:
    """Path of (node, action index) pairs from the root.

    Stops at the first action without a child, or on reaching a terminal
    node or the depth rail (that node is then the path's last child).
    """
    limit = tree.space.max_walk_length if max_depth is None else max_depth
    node, path = tree.root, []
    while not node.state.is_terminal and node.depth < limit:
        a = kernels.ucb_select(node.q_sum, node.visits, c)
        path.append((node, a))
        child = node.children.get(a)
        if child is None:
            break
        node = child
    return path


def path_end(tree: Tree, path: list):
    """(node the path ends in, whether that node still needs expanding)."""
    if not path:
        return tree.root, False
    node, a = path[-1]
    child = node.children.get(a)
    return (node, True) if child is None else (child, False)


def expand(tree: Tree, path: list) -> TreeNode:
    node, a = path[-1]
    return tree.expand(node, a)


def simulate(space: SearchSpace, state, rng: np.random.Generator):
    """Uniform random walk to a terminal state."""
    length = space.max_walk_length
    enc = space.rollout_encoding(state, lambda: rng.random(length))
    return state if state.is_terminal else space.decode(enc, terminal=True)


def mean_prediction(preds) -> float:
    if len(preds) == 0:
        raise EmptyPredictions("need at least one surrogate prediction")
    return math.fsum(float(p) for p in preds) / len(preds)


def blend(actual: float, q_hat: float) -> float:
    return (actual + q_hat) / 2.0


def estimate_q(actual: float, preds) -> float:
    return blend(float(actual), mean_prediction(preds))


def backpropagate(path: list, q: float, n: int):
    for node, a in reversed(path):
        node.q_sum[a] += q
        node.q_final[a] += q
        node.visits[a] += n


def backpropagate_estimate(path: list, q_hat: float):
    """First phase: count the visit and add the surrogate-only estimate."""
    for node, a in reversed(path):
        node.q_sum[a] += q_hat
        node.visits[a] += 1
        node.n_pending[a] += 1


def backpropagate_correction(path: list, q_hat: float, q: float):
    """Second phase: replace a pending estimate ``q_hat`` by the final ``q``."""
    for node, a in reversed(path):
        node.q_final[a] += q
        node.n_pending[a] -= 1
        if node.n_pending[a] == 0:
            node.q_sum[a] = node.q_final[a]
        else:
            node.q_sum[a] += q - q_hat


@dataclass
class Pending:
    q_hat: float
    path: list
    origin: TreeNode


@dataclass
class JobRecord:
    job_id: int
    encoding: tuple
    origin: int
    transfer_parent: tuple | None
    epoch_budget: int
    accuracy: float | None = None


@dataclass
class RolloutResult:
    terminal_encoding: tuple
    origin: TreeNode
    q_hat: float | None
    actual_accuracy: float | None = None
    path: list = field(default_factory=list, repr=False)


@dataclass
class TraceRow:
    sample_index: int
    encoding: tuple
    accuracy: float
    best_so_far: float
    epochs_charged: int
    transfer_parent: tuple | None = None


# -- engine ---------------------------------------------------------------------


class Engine:
    """Owns the tree, surrogate, dataset and RNG of one search run.

    ``predictor`` is a MultiStageModel, a ConstantPredictor (ablation) or
    None for plain UCT where the real accuracy is the only reward.
    """

    def __init__(
        self,
        space: SearchSpace,
        evaluator: Evaluator,
        predictor=None,
        cfg: SearchConfig | None = None,
        train_cfg: TrainConfig | None = None,
        transfer: bool = True,
    ):
        self.space = space
        self.evaluator = evaluator
        self.predictor = predictor
        self.cfg = cfg or SearchConfig()
        self.train_cfg = train_cfg or TrainConfig()
        self.transfer = transfer
        self.tree = Tree(space)
        self.rng = np.random.default_rng(self.cfg.rng_seed)
        self.max_depth = self.cfg.max_tree_depth or space.max_walk_length
        self.iteration = 0
        self.n_samples = 0
        self.best_accuracy = -INF
        self.best_encoding = None
        self.trace: list = []
        self.pending: dict = {}
        self.jobs: dict = {}
        self.next_job_id = 1
        self.retrains = 0
        self._X = np.zeros((64, space.encoding_length), dtype=np.int64)
        self._F = np.zeros((64, space.encoding_length))
        self._y = np.zeros(64)

    # -- helpers -------------------------------------------------------------
    @property
    def root(self) -> TreeNode:
        return self.tree.root

    @property
    def dataset(self):
        return self._X[: self.n_samples], self._y[: self.n_samples]

    def _rollout(self, node: TreeNode) -> tuple:
        length = self.space.max_walk_length
        return self.space.rollout_encoding(node.state, lambda: self.rng.random(length))

    def _iterate(self):
        """Selection, expansion and the k+1 simulations of one iteration."""
        if self.cfg.max_episodes is not None and self.iteration >= self.cfg.max_episodes:
            raise StopIteration("episode limit reached")
        self.iteration += 1
        path = select(self.tree, self.cfg.c, self.max_depth)
        origin, needs = path_end(self.tree, path)
        if needs:
            origin = expand(self.tree, path)
        enc = self._rollout(origin)
        q_hat = None
        if self.predictor is not None:
            sims = [self._rollout(origin) for _ in range(self.cfg.k)]
            preds = self.predictor.predict(self.space.features(sims))
            q_hat = mean_prediction(preds)
        return path, origin, enc, q_hat

    def _combine(self, acc: float, q_hat) -> float:
        return acc if q_hat is None else blend(acc, q_hat)

    def _parent_for(self, origin: TreeNode, enc):
        return find_transfer_parent(origin, enc) if self.transfer else None

    def _register(self, record, origin: TreeNode):
        """Book-keeping for a newly evaluated architecture."""
        self.n_samples += 1
        enc, acc = record.encoding, record.accuracy
        if acc > self.best_accuracy:
            self.best_accuracy, self.best_encoding = acc, enc
        self.trace.append(
            TraceRow(self.n_samples, enc, acc, self.best_accuracy, record.epochs_charged,
                     record.transfer_parent)
        )
        origin.evaluated.append((self.n_samples, enc))
        self._store(self.n_samples - 1, enc, acc)
        if self.predictor is not None:
            self.predictor.observe(acc)
            if self.n_samples % self.cfg.retrain_every == 0:
                n = self.n_samples
                self.predictor.fit(self._F[:n], self._y[:n], self.train_cfg)
                self.retrains += 1

    def _store(self, i: int, enc, acc: float):
        if i >= len(self._y):
            grow = max(64, len(self._y))
            self._X = np.concatenate([self._X, np.zeros((grow, self._X.shape[1]), dtype=np.int64)])
            self._F = np.concatenate([self._F, np.zeros((grow, self._F.shape[1]))])
            self._y = np.concatenate([self._y, np.zeros(grow)])
        self._X[i] = enc
        self._F[i] = self.space.features([enc])[0]
        self._y[i] = acc

    # -- sequential mode -------------------------------------------------------
    def step(self) -> RolloutResult:
        path, origin, enc, q_hat = self._iterate()
        fresh = enc not in self.evaluator
        parent = self._parent_for(origin, enc) if fresh else None
        record = self.evaluator.evaluate(enc, parent)
        backpropagate(path, self._combine(record.accuracy, q_hat), 1)
        if fresh:
            self._register(record, origin)
        return RolloutResult(enc, origin, q_hat, record.accuracy, path)

    def run(self, budget: int, stop=None):
        """Step until ``budget`` samples, ``stop(engine)`` or the episode cap."""
        while self.n_samples < budget:
            try:
                self.step()
            except StopIteration:
                break
            if stop is not None and stop(self):
                break
        return self

    # -- distributed mode ------------------------------------------------------
    def preemptive_backprop(self, result: RolloutResult):
        q_hat = 0.0 if result.q_hat is None else result.q_hat
        backpropagate_estimate(result.path, q_hat)
        self.pending.setdefault(result.terminal_encoding, []).append(
            Pending(q_hat, result.path, result.origin)
        )

    def final_backprop(self, enc, acc: float):
        """Apply the correction for every pending rollout of ``enc``."""
        records = self.pending.pop(tuple(enc), None)
        if not records:
            raise UnknownArch(f"no pending rollout for {list(enc)}")
        plain = self.predictor is None
        for rec in records:
            target = acc if plain else blend(acc, rec.q_hat)
            backpropagate_correction(rec.path, rec.q_hat, target)

    def propose(self):
        """One iteration in two-phase mode. Returns a JobRecord to dispatch,
        or None when the result was already known or already in flight."""
        path, origin, enc, q_hat = self._iterate()
        self.preemptive_backprop(RolloutResult(enc, origin, q_hat, None, path))
        if enc in self.evaluator:
            self.final_backprop(enc, self.evaluator.cache[enc])
            return None
        if enc in self.jobs:
            return None
        parent = self._parent_for(origin, enc)
        job = JobRecord(
            self.next_job_id, enc, origin.id, parent, self.evaluator.epochs_for(parent)
        )
        self.next_job_id += 1
        self.jobs[enc] = job
        return job

    def complete(self, enc, acc: float):
        """Apply a worker's result for an outstanding job."""
        enc = tuple(enc)
        job = self.jobs.pop(enc, None)
        if job is None:
            raise UnknownArch(f"no outstanding job for {list(enc)}")
        job.accuracy = float(acc)
        self.final_backprop(enc, job.accuracy)
        record = self.evaluator.record(enc, job.accuracy, job.transfer_parent)
        self._register(record, self.tree.nodes[job.origin])
        return record

    def outstanding_jobs(self) -> list:
        return sorted(self.jobs.values(), key=lambda j: j.job_id)

    # -- persistence -----------------------------------------------------------
    def state_dict(self) -> dict:
        nodes = []
        for nd in self.tree.nodes:
            nodes.append({
                "parent": None if nd.parent is None else nd.parent.id,
                "action": nd.incoming,
                "q_sum": nd.q_sum,
                "visits": nd.visits,
                "q_final": nd.q_final,
                "n_pending": nd.n_pending,
                "evaluated": [[i, list(e)] for i, e in nd.evaluated],
            })
        pending = [
            {
                "encoding": list(enc),
                "records": [
                    {"q_hat": r.q_hat, "origin": r.origin.id,
                     "path": [[nd.id, a] for nd, a in r.path]}
                    for r in recs
                ],
            }
            for enc, recs in self.pending.items()
        ]
        if self.predictor is None:
            pred = None
        else:
            kind = "constant" if isinstance(self.predictor, ConstantPredictor) else "multistage"
            pred = {"type": kind, "state": self.predictor.state_dict()}
        X, y = self.dataset
        return {
            "kind": "engine",
            "space": self.space.config(),
            "search": asdict(self.cfg),
            "train": self.train_cfg.to_dict(),
            "transfer": self.transfer,
            "evaluator": {
                "scratch_epochs": self.evaluator.scratch_epochs,
                "transfer_epochs": self.evaluator.transfer_epochs,
                **self.evaluator.state_dict(),
            },
            "predictor": pred,
            "nodes": nodes,
            "pending": pending,
            "jobs": [
                {"job_id": j.job_id, "encoding": list(j.encoding), "origin": j.origin,
                 "transfer_parent": None if j.transfer_parent is None else list(j.transfer_parent),
                 "epoch_budget": j.epoch_budget}
                for j in self.outstanding_jobs()
            ],
            "next_job_id": self.next_job_id,
            "dataset_X": X.copy(),
            "dataset_y": y.copy(),
            "rng": self.rng.bit_generator.state,
            "iteration": self.iteration,
            "n_samples": self.n_samples,
            "retrains": self.retrains,
            "best_accuracy": None if self.best_encoding is None else self.best_accuracy,
            "best_encoding": None if self.best_encoding is None else list(self.best_encoding),
            "trace": [
                [r.sample_index, list(r.encoding), r.accuracy, r.best_so_far, r.epochs_charged,
                 None if r.transfer_parent is None else list(r.transfer_parent)]
                for r in self.trace
            ],
        }

    @classmethod
    def from_state(cls, st: dict, backend=None) -> "Engine":
        space = space_from_config(st["space"])
        ev_st = st["evaluator"]
        evaluator = Evaluator(backend, ev_st["scratch_epochs"], ev_st["transfer_epochs"])
        evaluator.load_state(ev_st)
        pred = st["predictor"]
        if pred is None:
            predictor = None
        elif pred["type"] == "constant":
            predictor = ConstantPredictor.from_state(pred["state"])
        else:
            predictor = MultiStageModel.from_state(pred["state"])
        eng = cls(space, evaluator, predictor, SearchConfig(**st["search"]),
                  TrainConfig(**st["train"]), st["transfer"])
        tree = eng.tree
        for rec in st["nodes"][1:]:
            tree.expand(tree.nodes[rec["parent"]], rec["action"])
        for nd, rec in zip(tree.nodes, st["nodes"]):
            nd.q_sum[:] = np.asarray(rec["q_sum"], dtype=np.float64)
            nd.visits[:] = np.asarray(rec["visits"], dtype=np.int64)
            nd.q_final[:] = np.asarray(rec["q_final"], dtype=np.float64)
            nd.n_pending[:] = np.asarray(rec["n_pending"], dtype=np.int64)
            nd.evaluated = [(int(i), tuple(e)) for i, e in rec["evaluated"]]
        for item in st["pending"]:
            eng.pending[tuple(item["encoding"])] = [
                Pending(r["q_hat"], [(tree.nodes[i], a) for i, a in r["path"]], tree.nodes[r["origin"]])
                for r in item["records"]
            ]
        for j in st["jobs"]:
            parent = None if j["transfer_parent"] is None else tuple(j["transfer_parent"])
            eng.jobs[tuple(j["encoding"])] = JobRecord(
                j["job_id"], tuple(j["encoding"]), j["origin"], parent, j["epoch_budget"]
            )
        eng.next_job_id = st["next_job_id"]
        n = st["n_samples"]
        X = np.asarray(st["dataset_X"], dtype=np.int64).reshape(n, space.encoding_length)
        for i in range(n):
            eng._store(i, tuple(X[i]), float(st["dataset_y"][i]))
        eng.rng.bit_generator.state = st["rng"]
        eng.iteration = st["iteration"]
        eng.n_samples = n
        eng.retrains = st["retrains"]
        if st["best_encoding"] is not None:
            eng.best_accuracy = st["best_accuracy"]
            eng.best_encoding = tuple(st["best_encoding"])
        eng.trace = [TraceRow(i, tuple(e), a, b, ep, None if tp is None else tuple(tp))
                     for i, e, a, b, ep, tp in st["trace"]]
        return eng

    def snapshot(self) -> bytes:
        return snapshot.pack(self.state_dict())

    @classmethod
    def restore(cls, blob: bytes, backend=None) -> "Engine":
        return cls.from_state(snapshot.unpack(blob), backend)


def search_step(engine: Engine) -> RolloutResult:
    return engine.step()


def preemptive_backprop(engine: Engine, result: RolloutResult):
    engine.preemptive_backprop(result)


def final_backprop(engine: Engine, arch, acc: float):
    engine.final_backprop(arch, acc)


def restore(blob: bytes, backend=None) -> Engine:
    return Engine.restore(blob, backend)
