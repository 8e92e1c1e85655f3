"""Scenarios: the straight-semicircle-straight benchmark and JSON scenario files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .core import Pose2D, Trajectory3D
from .planner import World2D

SCENARIO_VERSION = 1

BENCH_INNER_RADIUS = 1.0
BENCH_OUTER_RADIUS = 1.65
BENCH_STRAIGHT = 1.0
BENCH_HEIGHT = 0.2
BENCH_LOAD = 0.65


@dataclass(frozen=True)
class Scenario:
    """Leader trajectory first; robot 1 is the leader, robot 2 the follower."""

    trajectories: Tuple[Trajectory3D, Trajectory3D]
    starts: Tuple[Pose2D, Pose2D]
    load_length: float
    world: Optional[World2D] = None
    name: str = "custom"

    def __post_init__(self):
        if len(self.trajectories[0]) != len(self.trajectories[1]):
            raise ValueError("both trajectories need the same number of waypoints")
        if self.load_length <= 0:
            raise ValueError("load length must be positive")

    @property
    def n_d(self) -> int:
        return len(self.trajectories[0])


def _benchmark_path(radius: float, n_straight: int, n_arc: int) -> np.ndarray:
    up = np.linspace(0.0, BENCH_STRAIGHT, n_straight + 1)
    first = np.column_stack([np.full_like(up, radius), up - BENCH_STRAIGHT])
    ang = np.linspace(0.0, math.pi, n_arc + 1)[1:]
    arc = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    arc[-1] = (-radius, 0.0)
    down = np.linspace(0.0, BENCH_STRAIGHT, n_straight + 1)[1:]
    last = np.column_stack([np.full_like(down, -radius), -down])
    return np.vstack([first, arc, last])


def benchmark_split(n_d: int) -> Tuple[int, int]:
    """Intervals per straight piece and on the arc, shared by both trajectories."""
    if n_d < 4:
        raise ValueError("benchmark needs n_d >= 4")
    mean_arc = 0.5 * (BENCH_INNER_RADIUS + BENCH_OUTER_RADIUS) * math.pi
    share = BENCH_STRAIGHT / (2 * BENCH_STRAIGHT + mean_arc)
    n_straight = max(1, int(round((n_d - 1) * share)))
    n_arc = n_d - 1 - 2 * n_straight
    if n_arc < 1:
        n_straight = (n_d - 2) // 2
        n_arc = n_d - 1 - 2 * n_straight
    return n_straight, n_arc


def build_benchmark_scenario(n_d: int = 60) -> Scenario:
    """Inner (r = 1 m) and outer (r = 1.65 m) straight-semicircle-straight paths.

    Both trajectories are cut at the same fractions of each piece, so paired
    waypoints stay a load length apart.
    """
    ns, na = benchmark_split(n_d)
    trajs = []
    for radius in (BENCH_INNER_RADIUS, BENCH_OUTER_RADIUS):
        xy = _benchmark_path(radius, ns, na)
        trajs.append(Trajectory3D(np.column_stack([xy, np.full(len(xy), BENCH_HEIGHT)])))
    heading = math.pi / 2  # tangent of the first straight piece
    starts = (Pose2D(BENCH_INNER_RADIUS, -1.0, heading), Pose2D(BENCH_OUTER_RADIUS, -1.0, heading))
    return Scenario((trajs[0], trajs[1]), starts, BENCH_LOAD, None, "benchmark")


def scenario_to_dict(sc: Scenario) -> dict:
    def robot(traj, pose):
        return {"start": [pose.x, pose.y, pose.theta], "waypoints": traj.waypoints.tolist()}

    return {
        "version": SCENARIO_VERSION,
        "name": sc.name,
        "load_length": sc.load_length,
        "leader": robot(sc.trajectories[0], sc.starts[0]),
        "follower": robot(sc.trajectories[1], sc.starts[1]),
    }


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("version") != SCENARIO_VERSION:
        raise ValueError(f"unsupported scenario version {d.get('version')!r}")
    try:
        trajs = tuple(Trajectory3D(np.array(d[k]["waypoints"], dtype=float)) for k in ("leader", "follower"))
        starts = tuple(Pose2D(*d[k]["start"]) for k in ("leader", "follower"))
        return Scenario(trajs, starts, float(d["load_length"]), None, str(d.get("name", "custom")))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


def save_scenario(sc: Scenario, path, extra: Optional[dict] = None) -> None:
    d = scenario_to_dict(sc)
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1))


def reference_times(trajs: Tuple[Trajectory3D, Trajectory3D], speed: float) -> np.ndarray:
    """Waypoint timestamps so the faster of the paired tools moves at ``speed``."""
    seg = np.maximum(
        np.linalg.norm(np.diff(trajs[0].waypoints, axis=0), axis=1),
        np.linalg.norm(np.diff(trajs[1].waypoints, axis=0), axis=1),
    )
    return np.concatenate([[0.0], np.cumsum(seg / speed)])


def reference_at(traj: Trajectory3D, times: np.ndarray, t) -> np.ndarray:
    """Tool reference at time(s) ``t``; clamps to the end points."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = traj.waypoints
    return np.column_stack([np.interp(t, times, w[:, i]) for i in range(3)])
