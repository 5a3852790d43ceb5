"""Command-line entry point: search, worker, optimum, resume."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ALGOS, ExperimentConfig, build_config, load_config
from .errors import AlphaXError
from .space import SPACES


def _search_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML file with experiment settings; flags override it")
    p.add_argument("--space", choices=sorted(SPACES))
    p.add_argument("--oracle", help="synthetic:<seed> or tabular:<path>")
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--trials", type=int)
    p.add_argument("--budget", type=int, help="sample budget per trial (default: size of the space)")
    p.add_argument("--c", type=float, help="UCB exploration constant")
    p.add_argument("--k", type=int, help="surrogate-predicted rollouts per iteration")
    p.add_argument("--seed", type=int, help="seed of the first trial; trial i uses seed + i")
    p.add_argument("--out", help="output directory")
    p.add_argument("--snapshot-every", type=int, dest="snapshot_every", help="samples between snapshots")
    p.add_argument("--P", type=int, help="regularized evolution population size")
    p.add_argument("--T", type=int, help="regularized evolution tournament size")
    topo = p.add_mutually_exclusive_group()
    topo.add_argument("--workers", type=int, help="evaluate with N in-process workers")
    topo.add_argument("--listen", help="accept TCP workers on HOST:PORT")
    topo.add_argument("--master", help="serve as a worker for the master at HOST:PORT")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphax", description="Tree-search architecture search experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _search_args(sub.add_parser("search", help="run seeded trials and write CSV results"))

    w = sub.add_parser("worker", help="evaluate jobs for a master")
    w.add_argument("--master", required=True, help="HOST:PORT of the master")
    w.add_argument("--oracle", required=True)
    w.add_argument("--space", choices=sorted(SPACES))
    w.add_argument("--config")
    w.add_argument("--max-retries", type=int, default=20, dest="max_retries")

    o = sub.add_parser("optimum", help="print the global optimum of a space")
    o.add_argument("--space", choices=sorted(SPACES))
    o.add_argument("--oracle", required=True)
    o.add_argument("--config")

    r = sub.add_parser("resume", help="continue an interrupted search from its snapshot")
    r.add_argument("--snapshot", required=True)
    r.add_argument("--budget", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--out")
    return parser


def _config(args, keys) -> ExperimentConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {k: getattr(args, k, None) for k in keys}
    return build_config(file_values, overrides)


SEARCH_KEYS = ("space", "oracle", "algo", "trials", "budget", "c", "k", "seed", "out",
               "snapshot_every", "P", "T", "workers", "listen")


def _run_worker(cfg: ExperimentConfig, address: str, max_retries: int) -> int:
    from .dist import TcpChannel, WorkerConfig, parse_address, worker_loop
    from .oracle import parse_oracle_spec

    backend = parse_oracle_spec(cfg.oracle, cfg.make_space())
    addr = parse_address(address)
    stats = worker_loop(lambda: TcpChannel(addr), backend, WorkerConfig(max_retries=max_retries))
    print(f"worker finished after {stats.jobs} jobs")
    return 0


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from . import harness

    try:
        if args.command == "search":
            if args.master:
                return _run_worker(_config(args, ("space", "oracle")), args.master, 20)
            cfg = _config(args, SEARCH_KEYS)
            harness.run_trials(cfg)
        elif args.command == "worker":
            return _run_worker(_config(args, ("space", "oracle")), args.master, args.max_retries)
        elif args.command == "optimum":
            cfg = _config(args, ("space", "oracle"))
            space, _, enc, acc = harness.load_problem(cfg)
            print(json.dumps({"space": space.config(), "size": space.count(),
                              "encoding": list(enc), "accuracy": acc}))
        elif args.command == "resume":
            harness.resume(args.snapshot, {"budget": args.budget, "trials": args.trials, "out": args.out})
    except KeyboardInterrupt:
        print("interrupted; continue with `alphax resume --snapshot <out>/snapshot.bin`", file=sys.stderr)
        return 130
    except (AlphaXError, ValueError, OSError) as exc:
        print(f"alphax: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
