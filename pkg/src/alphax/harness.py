"""Seeded multi-trial experiments measuring samples to the global optimum."""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import shutil
import subprocess
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels, snapshot
from .baselines import QConfig, hill_climbing, q_learning, random_search, regularized_evolution
from .config import ENGINE_ALGOS, ExperimentConfig
from .dist import JobQueue, MasterConfig, TcpListener, master_loop, parse_address, run_in_process
from .mcts import Engine, SearchConfig
from .oracle import Evaluator, global_optimum, parse_oracle_spec
from .surrogate import ConstantPredictor, MultiStageModel, TrainConfig

TRIAL_COLUMNS = ["algo", "seed", "samples_to_optimum", "best_accuracy", "total_epochs", "samples"]
SAMPLE_COLUMNS = ["algo", "seed", "sample_index", "encoding", "accuracy", "best_so_far", "epochs_charged",
                  "transfer_parent"]
NOT_REACHED = "NA"


class Interrupted(Exception):
    """Raised by an interrupt hook after a snapshot has been written."""


@dataclass
class TrialResult:
    seed: int
    samples_to_optimum: int | None
    best_accuracy: float
    total_epochs: int
    wall_time: float
    samples: int = 0

    @property
    def reached(self) -> bool:
        return self.samples_to_optimum is not None


# -- statistics ----------------------------------------------------------------------


def percentile(values, q: float) -> float:
    """Linear-interpolated percentile treating None (optimum not reached) as +inf."""
    v = sorted(math.inf if x is None else float(x) for x in values)
    if not v:
        raise ValueError("no values")
    pos = (len(v) - 1) * q / 100.0
    lo, hi = math.floor(pos), math.ceil(pos)
    frac = pos - lo
    if frac == 0.0:
        return v[lo]
    return v[lo] + (v[hi] - v[lo]) * frac


def summarize(values) -> dict:
    values = list(values)
    return {
        "trials": len(values),
        "reached": sum(x is not None for x in values),
        "q1": percentile(values, 25),
        "median": percentile(values, 50),
        "q3": percentile(values, 75),
    }


def format_summary(algo: str, s: dict) -> str:
    def f(x):
        return "not reached" if math.isinf(x) else f"{x:g}"

    return (f"{algo}: reached {s['reached']}/{s['trials']} trials; samples to optimum "
            f"median {f(s['median'])} (q1 {f(s['q1'])}, q3 {f(s['q3'])})")


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"], cwd=Path(__file__).parent,
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# -- building blocks -------------------------------------------------------------------


def load_problem(cfg: ExperimentConfig):
    """(space, backend, optimum encoding, optimum accuracy)."""
    space = cfg.make_space()
    backend = parse_oracle_spec(cfg.oracle, space)
    opt, acc = global_optimum(backend, space)
    return space, backend, space.encode(opt), acc


def build_engine(cfg: ExperimentConfig, space, backend, seed: int) -> Engine:
    s = cfg.surrogate
    if cfg.algo == "alphax":
        pred = MultiStageModel(space.encoding_length, s.hidden, s.stages, seed=seed, init_scale=s.init_scale)
    elif cfg.algo == "alphax-no-metadnn":
        pred = ConstantPredictor()
    else:
        pred = None
    scfg = SearchConfig(c=cfg.c, k=cfg.k, rng_seed=seed, retrain_every=s.retrain_every)
    tcfg = TrainConfig(epochs=s.epochs, learning_rate=s.learning_rate, batch_size=s.batch_size,
                       seed=seed, max_steps=s.max_steps)
    return Engine(space, Evaluator(backend), pred, scfg, tcfg, transfer=cfg.transfer)


def export_tree(engine: Engine, path):
    nodes, edges = [], []
    for nd in engine.tree.nodes:
        if nd.parent is None:
            visits = nd.n
            mean_q = float(nd.q_sum.sum()) / visits if visits else None
        else:
            visits = int(nd.parent.visits[nd.incoming])
            mean_q = nd.parent.mean_q(nd.incoming)
            edges.append({"parent": nd.parent.id, "action": str(nd.parent.actions[nd.incoming]),
                          "child": nd.id})
        nodes.append({"id": nd.id, "encoding": list(engine.space.encode(nd.state)),
                      "mean_q": mean_q, "visits": visits, "depth": nd.depth})
    tmp = Path(f"{path}.tmp")
    tmp.write_text(json.dumps({"nodes": nodes, "edges": edges}))
    os.replace(tmp, path)


def _json_list(enc) -> str:
    return json.dumps(list(enc), separators=(",", ":"))


def _trial_from_trace(seed, trace, opt_acc, wall) -> TrialResult:
    hit = next((r.sample_index for r in trace if r.accuracy >= opt_acc), None)
    best = max((r.accuracy for r in trace), default=float("nan"))
    return TrialResult(seed, hit, best, sum(r.epochs_charged for r in trace), wall, len(trace))


# -- runner ------------------------------------------------------------------------------


class Runner:
    def __init__(self, cfg: ExperimentConfig, interrupt=None, log=print):
        self.cfg = cfg
        self.interrupt = interrupt
        self.log = log
        self.out = Path(cfg.out)
        self.space, self.backend, self.opt_enc, self.opt_acc = load_problem(cfg)
        self.budget = cfg.budget or self.space.count()
        self.results: list = []
        self.listener = None
        self.registry: dict = {}
        self.last_engine = None

    # files
    @property
    def trials_csv(self):
        return self.out / "trials.csv"

    @property
    def samples_csv(self):
        return self.out / "samples.csv"

    def _offsets(self) -> dict:
        return {"trials": self.trials_csv.stat().st_size, "samples": self.samples_csv.stat().st_size}

    def _start_files(self, offsets=None):
        self.out.mkdir(parents=True, exist_ok=True)
        if offsets is None:
            with open(self.trials_csv, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(TRIAL_COLUMNS)
            with open(self.samples_csv, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(SAMPLE_COLUMNS)
        else:
            os.truncate(self.trials_csv, offsets["trials"])
            os.truncate(self.samples_csv, offsets["samples"])

    def _append(self, res: TrialResult, trace):
        algo = self.cfg.algo
        with open(self.samples_csv, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for r in trace:
                w.writerow([algo, res.seed, r.sample_index, _json_list(r.encoding),
                            repr(float(r.accuracy)), repr(float(r.best_so_far)), r.epochs_charged,
                            "" if r.transfer_parent is None else _json_list(r.transfer_parent)])
        with open(self.trials_csv, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow([
                algo, res.seed, NOT_REACHED if res.samples_to_optimum is None else res.samples_to_optimum,
                repr(float(res.best_accuracy)), res.total_epochs, res.samples,
            ])

    def _snapshot(self, trial: int, offsets: dict, engine=None, done=False):
        snapshot.write(self.out / "snapshot.bin", {
            "kind": "harness",
            "config": self.cfg.to_dict(),
            "trial": trial,
            "done": done,
            "offsets": offsets,
            "results": [asdict(r) for r in self.results],
            "engine": None if engine is None else engine.state_dict(),
        })

    # trials
    def _stop(self, obj) -> bool:
        return obj.best_accuracy >= self.opt_acc

    def _run_engine(self, trial: int, seed: int, engine: Engine, offsets: dict) -> Engine:
        cfg = self.cfg

        def snap(e):
            self._snapshot(trial, offsets, e)
            if self.interrupt is not None:
                self.interrupt(trial, e)

        if cfg.workers or cfg.listen:
            mcfg = MasterConfig(
                budget=self.budget, workers=max(cfg.workers, 1), snapshot_every=cfg.snapshot_every,
                max_null_proposals=cfg.stall_limit,
                # one worker runs synchronously, which keeps the run deterministic
                watermark=1 if cfg.workers == 1 else None,
                on_snapshot=snap, stale_timeout=cfg.stale_timeout, stop=self._stop,
                shutdown_workers=trial == cfg.trials - 1,
            )
            if cfg.workers:
                run_in_process(engine, self.backend, cfg.workers, mcfg)
            else:
                master_loop(engine, JobQueue(), self.listener, mcfg, registry=self.registry)
            return engine
        last, stalled = engine.n_samples, 0
        while engine.n_samples < self.budget and not self._stop(engine):
            try:
                engine.step()
            except StopIteration:
                break
            n = engine.n_samples
            stalled = 0 if n != last else stalled + 1
            if stalled >= cfg.stall_limit:
                self.log(f"trial {trial}: no new architecture in {stalled} iterations; giving up")
                break
            if cfg.snapshot_every and n != last and n % cfg.snapshot_every == 0:
                snap(engine)
            last = n
        return engine

    def _run_baseline(self, seed: int):
        cfg, sp, b, n = self.cfg, self.space, self.backend, self.budget
        if cfg.algo == "rs":
            return random_search(sp, b, n, seed, stop=self._stop)
        if cfg.algo == "re":
            return regularized_evolution(sp, b, n, P=cfg.P, T=cfg.T, seed=seed, stop=self._stop)
        if cfg.algo == "ql":
            return q_learning(sp, b, n, QConfig(), seed=seed, stop=self._stop)
        return hill_climbing(sp, b, n, seed, stop=self._stop)

    def run(self, start: int = 0, offsets=None, engine_state=None) -> list:
        cfg = self.cfg
        self._start_files(offsets)
        if cfg.listen and cfg.algo in ENGINE_ALGOS:
            self.listener = TcpListener(*parse_address(cfg.listen))
            self.log(f"listening on {self.listener.address[0]}:{self.listener.address[1]}")
        try:
            for trial in range(start, cfg.trials):
                seed = cfg.seed + trial
                offsets = self._offsets()
                t0 = time.perf_counter()
                if cfg.algo in ENGINE_ALGOS:
                    if engine_state is not None:
                        engine = Engine.from_state(engine_state, self.backend)
                        engine_state = None
                    else:
                        engine = build_engine(cfg, self.space, self.backend, seed)
                    engine = self._run_engine(trial, seed, engine, offsets)
                    trace = engine.trace
                    self.last_engine = engine
                else:
                    trace = self._run_baseline(seed)
                res = _trial_from_trace(seed, trace, self.opt_acc, time.perf_counter() - t0)
                self.results.append(res)
                self._append(res, trace)
                if cfg.snapshot_every:
                    self._snapshot(trial + 1, self._offsets())
        finally:
            if self.listener is not None:
                self.listener.close()
        return self.finish()

    def finish(self) -> list:
        if self.last_engine is not None:
            export_tree(self.last_engine, self.out / "tree.json")
        self._snapshot(self.cfg.trials, self._offsets(), self.last_engine, done=True)
        stats = summarize(r.samples_to_optimum for r in self.results)
        manifest = {
            "version": version_string(),
            "config": self.cfg.to_dict(),
            "seeds": [r.seed for r in self.results],
            "space": self.space.config(),
            "space_size": self.space.count(),
            "budget": self.budget,
            "optimum": {"encoding": list(self.opt_enc), "accuracy": self.opt_acc},
            "x_axis": "distinct evaluated architectures (samples), one row per sample",
            "summary": {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in stats.items()},
            "wall_time": [r.wall_time for r in self.results],
            "columns": {"trials.csv": TRIAL_COLUMNS, "samples.csv": SAMPLE_COLUMNS},
            "kernel_backend": kernels.BACKEND_NAME,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        self.log(format_summary(self.cfg.algo, stats))
        return self.results


def run_trials(cfg: ExperimentConfig, interrupt=None, log=print) -> list:
    return Runner(cfg, interrupt, log).run()


def ablation_no_metadnn(cfg: ExperimentConfig, interrupt=None, log=print) -> list:
    return run_trials(replace(cfg, algo="alphax-no-metadnn"), interrupt, log)


def resume(snapshot_path, overrides: dict | None = None, interrupt=None, log=print) -> list:
    st = snapshot.read(snapshot_path)
    if st.get("kind") != "harness":
        raise ValueError(f"{snapshot_path} is not a harness snapshot")
    d = dict(st["config"])
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = ExperimentConfig.from_dict(d)
    src, dst = Path(st["config"]["out"]), Path(cfg.out)
    if dst.resolve() != src.resolve():
        dst.mkdir(parents=True, exist_ok=True)
        for name in ("trials.csv", "samples.csv"):
            shutil.copyfile(src / name, dst / name)
    runner = Runner(cfg, interrupt, log)
    runner.results = [TrialResult(**r) for r in st["results"]]
    if st["done"] and st["trial"] >= cfg.trials:
        if st["engine"] is not None:
            runner.last_engine = Engine.from_state(st["engine"], runner.backend)
        return runner.finish()
    return runner.run(st["trial"], st["offsets"], None if st["done"] else st["engine"])
