"""Command line entry point: ``cotransport run | plan | metrics``.

Errors print one line ``error kind=<kind> msg=<text>`` on stderr and exit with
the code listed in ``EXIT_CODES``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ConfigError, SimConfig, load_config
from .core import Pose2D
from .logs import LogIOError, read_log_csv, summarize, write_log_csv
from .planner import PlanningError, load_world, path_length, path_to_trajectories, plan_path
from .scenario import Scenario, build_benchmark_scenario, load_scenario, save_scenario
from .sync import run_simulation

EXIT_CODES = {"usage": 2, "io": 3, "config": 4, "input": 5, "planning": 6, "internal": 1}


class CliError(Exception):
    def __init__(self, kind: str, msg: str):
        super().__init__(msg)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _fail(kind: str, msg: str) -> int:
    flat = " ".join(str(msg).split())
    print(f"error kind={kind} msg={json.dumps(flat)}", file=sys.stderr)
    return EXIT_CODES[kind]


def _read_config(path: Optional[str]) -> SimConfig:
    if path is None:
        return SimConfig()
    try:
        return load_config(path)
    except OSError as exc:
        raise CliError("io", f"cannot read config {path}: {exc.strerror or exc}") from exc
    except ConfigError as exc:
        raise CliError("config", str(exc)) from exc


def _read_scenario(source: str, cfg: SimConfig) -> Scenario:
    if source == "benchmark":
        return build_benchmark_scenario(cfg.n_d)
    try:
        return load_scenario(source)
    except OSError as exc:
        raise CliError("io", f"cannot read scenario {source}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise CliError("input", f"scenario {source}: {exc}") from exc


def cmd_run(args) -> int:
    cfg = _read_config(args.config)
    scenario = _read_scenario(args.scenario, cfg)
    log = run_simulation(scenario, cfg, args.method, seed=args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = write_log_csv(log, out / f"{args.method.replace('-', '_')}_seed{args.seed}.csv")
    except (OSError, LogIOError) as exc:
        raise CliError("io", str(exc)) from exc
    print(path)
    return 0


def cmd_plan(args) -> int:
    cfg = _read_config(args.config)
    try:
        world = load_world(args.world)
    except OSError as exc:
        raise CliError("io", f"cannot read world {args.world}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise CliError("input", f"world {args.world}: {exc}") from exc
    q_init, q_goal = np.array(args.start, dtype=float), np.array(args.goal, dtype=float)
    try:
        # the offset trajectories sit l/2 to either side of the planned midline
        clearance = args.robot_radius + 0.5 * args.load_length
        path, _ = plan_path(world, q_init, q_goal, args.samples, args.neighbours, args.seed, clearance)
        if len(path) < 2:
            raise PlanningError("start and goal coincide")
        trajs = path_to_trajectories(path, args.load_length, args.height, args.n_d or cfg.n_d, world)
    except PlanningError as exc:
        raise CliError("planning", str(exc)) from exc
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc
    starts = []
    for traj in trajs:
        d = traj.xy[1] - traj.xy[0]
        starts.append(Pose2D(traj.xy[0][0], traj.xy[0][1], math.atan2(d[1], d[0])))
    sc = Scenario(trajs, tuple(starts), args.load_length, world, Path(args.world).stem)
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_scenario(sc, args.out, {"path": path.tolist(), "path_length": path_length(path), "seed": args.seed})
    except OSError as exc:
        raise CliError("io", f"cannot write {args.out}: {exc.strerror or exc}") from exc
    print(args.out)
    return 0


def _format_summary(s: dict) -> str:
    rows = [(k, v) for k, v in s.items()]
    width = max(len(k) for k, _ in rows)
    lines = []
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines)


def cmd_metrics(args) -> int:
    try:
        log = read_log_csv(args.log)
    except (OSError, LogIOError) as exc:
        raise CliError("io", str(exc)) from exc
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc
    s = summarize(log, args.load_length)
    print(json.dumps(s, sort_keys=True) if args.json else _format_summary(s))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cotransport", description="Two-robot leader-follower load transport simulator.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one method and write the CSV log")
    run.add_argument("--method", choices=["png-lf", "rrt-lf", "slq-mpc"], default="png-lf")
    run.add_argument("--scenario", default="benchmark", help="'benchmark' or a scenario JSON file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="out")
    run.add_argument("--config", help="JSON config overriding the defaults")
    run.set_defaults(func=cmd_run)

    plan = sub.add_parser("plan", help="PRM path through a world file, written as a scenario")
    plan.add_argument("world")
    plan.add_argument("--start", type=float, nargs=2, required=True, metavar=("X", "Y"))
    plan.add_argument("--goal", type=float, nargs=2, required=True, metavar=("X", "Y"))
    plan.add_argument("--out", default="scenario.json")
    plan.add_argument("--samples", type=int, default=200)
    plan.add_argument("--neighbours", type=int, default=10)
    plan.add_argument("--seed", type=int, default=0)
    plan.add_argument("--robot-radius", type=float, default=0.22)
    plan.add_argument("--load-length", type=float, default=0.65)
    plan.add_argument("--height", type=float, default=0.2)
    plan.add_argument("--n-d", type=int, default=None, help="waypoints per trajectory (default: config n_d)")
    plan.add_argument("--config", help="JSON config (n_d is taken from it)")
    plan.set_defaults(func=cmd_plan)

    met = sub.add_parser("metrics", help="summary of a run log")
    met.add_argument("log")
    met.add_argument("--load-length", type=float, default=None)
    met.add_argument("--json", action="store_true")
    met.set_defaults(func=cmd_metrics)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except CliError as exc:
        return _fail(exc.kind, str(exc))
    except Exception as exc:  # keep the one-line error contract
        logging.getLogger(__name__).debug("unhandled error", exc_info=True)
        return _fail("internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
