"""Comparison searches sharing the engine's space and oracle interfaces.

Every search counts a sample only when it evaluates an architecture it has
not seen before; repeats are served from the evaluator cache and charge no
epochs. All traces are lists of ``TraceRow``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import SpaceTooLarge
from .mcts import TraceRow
from .oracle import Evaluator
from .space import TERMINATE, SearchSpace

QL_STATE_CAP = 1_000_000


class Recorder:
    """Evaluates architectures and keeps the shared trace."""

    def __init__(self, space: SearchSpace, oracle, stop=None):
        self.space = space
        self.evaluator = oracle if isinstance(oracle, Evaluator) else Evaluator(oracle)
        self.stop = stop
        self.trace: list = []
        self.best = -np.inf

    @property
    def n_samples(self) -> int:
        return len(self.trace)

    def evaluate(self, state) -> float:
        enc = self.space.encode(state)
        fresh = enc not in self.evaluator
        rec = self.evaluator.evaluate(enc)
        if fresh:
            self.best = max(self.best, rec.accuracy)
            self.trace.append(
                TraceRow(len(self.trace) + 1, enc, rec.accuracy, self.best, rec.epochs_charged)
            )
        return rec.accuracy

    def done(self, budget: int) -> bool:
        return self.n_samples >= budget or (self.stop is not None and bool(self.trace) and self.stop(self))

    @property
    def best_accuracy(self) -> float:
        return self.best


def random_walk(space: SearchSpace, rng: np.random.Generator, state=None):
    """Uniform walk over legal actions (Terminate included) until terminal."""
    state = space.initial_state() if state is None else state
    enc = space.rollout_encoding(state, lambda: rng.random(space.max_walk_length))
    return space.decode(enc, terminal=True)


def _draw_cap(budget: int) -> int:
    return 100 * budget + 10_000


def random_search(space, oracle, budget: int, seed: int = 0, stop=None) -> list:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    rec = Recorder(space, oracle, stop)
    for _ in range(_draw_cap(budget)):
        if rec.done(budget):
            break
        rec.evaluate(random_walk(space, rng))
    return rec.trace


# -- regularized evolution ---------------------------------------------------------


@dataclass
class Member:
    state: object
    accuracy: float
    born: int


class RegularizedEvolution:
    def __init__(self, space, oracle, P: int = 500, T: int = 50, seed: int = 0, stop=None):
        if not P >= T >= 1:
            raise ValueError("need P >= T >= 1")
        self.space, self.P, self.T = space, P, T
        self.rng = np.random.default_rng(seed)
        self.rec = Recorder(space, oracle, stop)
        self.population: deque = deque()
        self.births = 0
        self.last_parent = None
        self.last_evicted = None

    def _add(self, state):
        acc = self.rec.evaluate(state)
        self.population.append(Member(state, acc, self.births))
        self.births += 1

    def step(self):
        if len(self.population) < self.P:
            self._add(random_walk(self.space, self.rng))
            return
        idx = self.rng.choice(self.P, size=self.T, replace=False)
        # best of the tournament; ties go to the earliest drawn
        parent = max((self.population[i] for i in idx), key=lambda m: m.accuracy)
        self.last_parent = parent
        self._add(self.space.mutate(parent.state, self.rng))
        self.last_evicted = self.population.popleft()

    def run(self, budget: int) -> list:
        for _ in range(_draw_cap(budget)):
            if self.rec.done(budget):
                break
            self.step()
        return self.rec.trace


def regularized_evolution(space, oracle, budget: int, P: int = 500, T: int = 50, seed: int = 0,
                          stop=None) -> list:
    return RegularizedEvolution(space, oracle, P, T, seed, stop).run(budget)


# -- tabular Q-learning ------------------------------------------------------------


@dataclass
class QConfig:
    init: float = 0.5
    alpha: float = 0.2
    gamma: float = 1.0
    epsilon: float = 0.2
    state_cap: int = QL_STATE_CAP


def q_update(q: float, reward: float, max_next: float, alpha: float, gamma: float) -> float:
    return q + alpha * (reward + gamma * max_next - q)


class QTable:
    def __init__(self, init: float = 0.5):
        self.init = init
        self.values: dict = {}

    def get(self, key, a: int) -> float:
        return self.values.get((key, a), self.init)

    def set(self, key, a: int, v: float):
        self.values[(key, a)] = v

    def row(self, key, n: int) -> np.ndarray:
        return np.array([self.get(key, a) for a in range(n)])


def epsilon_greedy(row: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(len(row)))
    best = np.flatnonzero(row == row.max())
    return int(best[rng.integers(len(best))])


class QLearner:
    def __init__(self, space, oracle, cfg: QConfig | None = None, seed: int = 0, stop=None):
        self.space = space
        self.cfg = cfg or QConfig()
        n = space.count()
        if n > self.cfg.state_cap:
            raise SpaceTooLarge(f"{n} architectures exceed the Q-table cap {self.cfg.state_cap}")
        self.rng = np.random.default_rng(seed)
        self.q = QTable(self.cfg.init)
        self.rec = Recorder(space, oracle, stop)

    def episode(self):
        sp, cfg = self.space, self.cfg
        s = sp.initial_state()
        while not getattr(s, "terminal", False):
            actions = sp.legal_actions(s)
            key = sp.encode(s)
            a = epsilon_greedy(self.q.row(key, len(actions)), cfg.epsilon, self.rng)
            nxt = sp.apply(s, actions[a])
            if actions[a] is TERMINATE:
                reward, max_next = self.rec.evaluate(nxt), 0.0
            else:
                reward = 0.0
                n_next = len(sp.legal_actions(nxt))
                max_next = float(self.q.row(sp.encode(nxt), n_next).max()) if n_next else 0.0
            self.q.set(key, a, q_update(self.q.get(key, a), reward, max_next, cfg.alpha, cfg.gamma))
            s = nxt

    def run(self, budget: int) -> list:
        for _ in range(_draw_cap(budget)):
            if self.rec.done(budget):
                break
            self.episode()
        return self.rec.trace


def q_learning(space, oracle, budget: int, qcfg: QConfig | None = None, seed: int = 0,
               stop=None) -> list:
    return QLearner(space, oracle, qcfg, seed, stop).run(budget)


# -- hill climbing -----------------------------------------------------------------


class HillClimber:
    def __init__(self, space, oracle, seed: int = 0, stop=None, restart_stop_prob: float = 0.15):
        self.space = space
        self.rng = np.random.default_rng(seed)
        self.rec = Recorder(space, oracle, stop)
        self.restart_stop_prob = restart_stop_prob
        self.restarts = 0
        self.moves: list = []

    def restart_state(self):
        s = self.space.random_state(self.rng, self.restart_stop_prob)
        if getattr(s, "terminal", False):
            s = self.space.decode(self.space.encode(s))
        return s

    def climb(self, budget: int, state=None):
        """One greedy ascent; returns the local optimum reached."""
        sp = self.space
        s = sp.initial_state() if state is None else state
        current = self.rec.evaluate(sp.terminate(s))
        while not self.rec.done(budget):
            best, best_acc = None, current
            for a in sp.legal_actions(s):
                if a is TERMINATE:
                    continue
                child = sp.apply(s, a)
                acc = self.rec.evaluate(sp.terminate(child))
                if acc > best_acc:
                    best, best_acc = child, acc
                if self.rec.done(budget):
                    break
            if best is None:
                return s
            self.moves.append(best)
            s, current = best, best_acc
        return s

    def run(self, budget: int) -> list:
        state = None
        for _ in range(_draw_cap(budget)):
            if self.rec.done(budget):
                break
            self.climb(budget, state)
            self.restarts += 1
            state = self.restart_state()
        return self.rec.trace


def hill_climbing(space, oracle, budget: int, seed: int = 0, stop=None) -> list:
    return HillClimber(space, oracle, seed, stop).run(budget)
