"""Stop-and-Sync coordination and the leader-follower arm loop.

Robot index 0 is always the leader, index 1 the follower.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .arm import (
    IkResult,
    ee_world,
    forward_kinematics,
    solve_ik_follower,
    solve_ik_leader,
    world_to_arm,
)
from .comparators import velocity_sampling_step
from .config import SimConfig
from .core import (
    STOP,
    JointState,
    Pose2D,
    RobotConfig,
    Trajectory3D,
    VelocityCommand,
    lift_to_trajectory,
    nearest_on_trajectory,
    project_point_to_polyline,
)
from .diff_drive import step_pose
from .guidance import DegenerateLOS, PngState, distance_to, png_step, reachability_radius
from .logs import SimulationLog, LogBuilder
from .mpc import MpcController
from .scenario import Scenario, reference_at, reference_times

log = logging.getLogger(__name__)

METHODS = ("png_lf", "rrt_lf", "slq_mpc")
LEADER, FOLLOWER = 0, 1


class RunComplete(RuntimeError):
    """The shared target index already passed the last waypoint."""


@dataclass(frozen=True)
class SyncState:
    p: int = 0  # shared 0-based target index
    stop: Tuple[bool, bool] = (False, False)
    k: int = 0


@dataclass(frozen=True)
class RobotRuntime:
    pose: Pose2D
    joints: JointState
    png: PngState
    role: str  # "leader" | "follower"


Tracker = Callable[[int, RobotRuntime, np.ndarray], Tuple[VelocityCommand, PngState]]


def png_tracker(cfgs: Sequence[RobotConfig]) -> Tracker:
    def track(a: int, robot: RobotRuntime, target):
        try:
            return png_step(robot.png, robot.pose, target, cfgs[a].dt, cfgs[a])
        except DegenerateLOS:
            return STOP, robot.png

    return track


def sampling_tracker(cfgs: Sequence[RobotConfig], seed: int, count: int, objective: str) -> Tracker:
    rngs = [np.random.default_rng([seed, a]) for a in range(2)]

    def track(a: int, robot: RobotRuntime, target):
        cfg = cfgs[a]
        cmd = velocity_sampling_step(robot.pose, target, reachability_radius(cfg), cfg, rngs[a], count, objective)
        return cmd, robot.png

    return track


def sync_step(
    state: SyncState,
    robots: Tuple[RobotRuntime, RobotRuntime],
    targets,
    rho_d: float,
    dt: float,
    tracker: Tracker,
    n_d: Optional[int] = None,
):
    """One pass of the Stop-and-Sync loop body.

    Returns ``(commands, robots, state')``. Stopped robots get a zero command and
    keep their pose; after both moves the shared index advances when both bases
    are within ``rho_d`` of their targets, otherwise an arrived robot is stopped.
    """
    if n_d is not None and state.p >= n_d:
        raise RunComplete(f"target index {state.p + 1} exceeds n_d={n_d}")
    cmds: List[VelocityCommand] = []
    moved: List[RobotRuntime] = []
    dist = []
    for a, robot in enumerate(robots):
        if state.stop[a]:
            cmd, new = STOP, robot
        else:
            cmd, png = tracker(a, robot, targets[a])
            new = replace(robot, pose=step_pose(robot.pose, cmd, dt), png=png)
        cmds.append(cmd)
        moved.append(new)
        dist.append(distance_to(new.pose, targets[a]))
    in1, in2 = dist[0] <= rho_d, dist[1] <= rho_d
    p, stop = state.p, state.stop
    if in1 and in2:
        p, stop = p + 1, (False, False)
        moved = [replace(r, png=r.png.reset()) for r in moved]
    elif in1:
        stop = (True, stop[1])
    elif in2:
        stop = (stop[0], True)
    return tuple(cmds), tuple(moved), SyncState(p, stop, state.k + 1)


def candidate_ee_point(base: Pose2D, traj: Trajectory3D) -> np.ndarray:
    """Nearest trajectory point to the base, found in XY and lifted to 3D."""
    _, i, t = project_point_to_polyline(base.xy, traj.xy)
    return lift_to_trajectory(traj, i, t)


def leader_follower_step(
    robots: Tuple[RobotRuntime, RobotRuntime],
    trajs: Tuple[Trajectory3D, Trajectory3D],
    cfgs: Sequence[RobotConfig],
    load_length: float,
    dt: Optional[float],
    leader_holds: bool = False,
):
    """Leader IK, leader tool estimate by FK, then constrained follower IK.

    ``leader_holds`` keeps the leader arm as is (it is stopped this step).
    Returns ``(results, ee_world_pair, candidates, robots')``.
    """
    lead, foll = robots
    cand_l = candidate_ee_point(lead.pose, trajs[LEADER])
    cand_f = candidate_ee_point(foll.pose, trajs[FOLLOWER])
    if leader_holds:
        f = forward_kinematics(cfgs[LEADER].arm, lead.joints.beta)
        res_l = IkResult(lead.joints.beta.copy(), float(np.linalg.norm(f - world_to_arm(lead.pose, cfgs[LEADER], cand_l))),
                         0.0, True, 0)
    else:
        res_l = solve_ik_leader(cfgs[LEADER].arm, world_to_arm(lead.pose, cfgs[LEADER], cand_l), lead.joints, dt)
    ee_l = ee_world(lead.pose, cfgs[LEADER], res_l.beta_star)
    res_f = solve_ik_follower(
        cfgs[FOLLOWER].arm,
        world_to_arm(foll.pose, cfgs[FOLLOWER], cand_f),
        foll.joints,
        dt,
        ee_l,
        foll.pose,
        cfgs[FOLLOWER],
        load_length,
    )
    ee_f = ee_world(foll.pose, cfgs[FOLLOWER], res_f.beta_star)
    new = (
        replace(lead, joints=lead.joints.with_beta(res_l.beta_star)),
        replace(foll, joints=foll.joints.with_beta(res_f.beta_star)),
    )
    return (res_l, res_f), (ee_l, ee_f), (cand_l, cand_f), new


def _initial_robots(scenario: Scenario, cfgs, png: PngState):
    robots = tuple(
        RobotRuntime(scenario.starts[a], JointState.for_chain(cfgs[a].arm), png, ("leader", "follower")[a])
        for a in range(2)
    )
    # place the arms before the run starts: no rate box on this solve
    return leader_follower_step(robots, scenario.trajectories, cfgs, scenario.load_length, None)


def _tracking_errors(ee, trajs):
    return tuple(float(np.linalg.norm(ee[a] - nearest_on_trajectory(ee[a], trajs[a]))) for a in range(2))


def run_simulation(
    scenario: Scenario,
    config: SimConfig,
    method: str = "png_lf",
    seed: int = 0,
    cfgs: Optional[Tuple[RobotConfig, RobotConfig]] = None,
) -> SimulationLog:
    """Simulate one method end to end and return the per-step log."""
    method = method.replace("-", "_")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    cfgs = cfgs or (config.robot, config.robot)
    meta = {"method": method, "seed": int(seed), "config_hash": config.digest(), "scenario": scenario.name,
            "n_d": scenario.n_d, "load_length": scenario.load_length}
    if method == "slq_mpc":
        return _run_mpc(scenario, config, cfgs, meta)
    png = PngState(config.png.N, config.png.v_cruise)
    if method == "png_lf":
        tracker = png_tracker(cfgs)
    else:
        tracker = sampling_tracker(cfgs, seed, config.sampling.count, config.sampling.objective)
    dt = cfgs[0].dt
    rho_d = reachability_radius(cfgs[0])
    trajs = scenario.trajectories
    n_d = scenario.n_d

    results, ee, cands, robots = _initial_robots(scenario, cfgs, png)
    book = LogBuilder(dt, meta)
    state = SyncState()
    # targets the bases already sit on are passed without motion
    while state.p < n_d and all(distance_to(robots[a].pose, trajs[a].xy[state.p]) <= rho_d for a in range(2)):
        state = replace(state, p=state.p + 1)
    book.add(robots, (STOP, STOP), (False, False), state.p, ee, _tracking_errors(ee, trajs), cands, results)

    while state.p < n_d and state.k < config.max_steps:
        targets = (trajs[0].xy[state.p], trajs[1].xy[state.p])
        p_now, stop_now = state.p, state.stop
        cmds, robots, state = sync_step(state, robots, targets, rho_d, dt, tracker, n_d)
        results, ee, cands, robots = leader_follower_step(
            robots, trajs, cfgs, scenario.load_length, dt, leader_holds=stop_now[LEADER]
        )
        book.add(robots, cmds, stop_now, p_now, ee, _tracking_errors(ee, trajs), cands, results)
    completed = state.p >= n_d
    if not completed:
        log.warning("%s run hit the step budget (%d) at target %d/%d", method, config.max_steps, state.p + 1, n_d)
    return book.finish(completed)


def _run_mpc(scenario: Scenario, config: SimConfig, cfgs, meta) -> SimulationLog:
    mc = config.mpc
    trajs = scenario.trajectories
    dt = cfgs[0].dt
    rho_d = reachability_radius(cfgs[0])
    times = reference_times(trajs, mc.ref_speed)
    t_end = float(times[-1])
    results, ee, cands, robots = _initial_robots(scenario, cfgs, PngState())
    ctrls = [MpcController(cfgs[a], mc.horizon, mc.q, mc.r, mc.delta, mc.barrier_weight, mc.max_iter, mc.tol)
             for a in range(2)]
    states = [np.concatenate([[r.pose.x, r.pose.y, r.pose.theta], r.joints.beta]) for r in robots]
    book = LogBuilder(dt, meta)

    def ref_index(t):
        return int(min(np.searchsorted(times, t, side="right") - 1, scenario.n_d - 1))

    book.add(robots, (STOP, STOP), (False, False), 0, ee, _tracking_errors(ee, trajs), cands, results)
    limit = min(config.max_steps, int(math.ceil(t_end / dt)) + mc.tail_steps)
    completed = False
    k = 0
    while k < limit:
        t = k * dt
        cmds, new_robots, new_results = [], [], []
        for a in range(2):
            ref = reference_at(trajs[a], times, t + dt * np.arange(mc.horizon + 1))
            u = ctrls[a].step(states[a], ref)
            cfg = cfgs[a]
            cmd = VelocityCommand(float(u[0]), float(u[1])).clipped(cfg.v_max, cfg.omega_max)
            rate = np.asarray(cfg.arm.rate_limit)
            beta = np.clip(states[a][3:] + dt * np.clip(u[2:], -rate, rate), cfg.arm.lo, cfg.arm.hi)
            pose = step_pose(robots[a].pose, cmd, dt)
            states[a] = np.concatenate([[pose.x, pose.y, pose.theta], beta])
            cmds.append(cmd)
            new_robots.append(replace(robots[a], pose=pose, joints=robots[a].joints.with_beta(beta)))
            sol = ctrls[a].last
            new_results.append(IkResult(beta, 0.0, 0.0, bool(sol.converged and not sol.line_search_failed),
                                        sol.iterations))
        robots = tuple(new_robots)
        k += 1
        ee = tuple(ee_world(robots[a].pose, cfgs[a], robots[a].joints.beta) for a in range(2))
        cands = tuple(reference_at(trajs[a], times, k * dt)[0] for a in range(2))
        book.add(robots, tuple(cmds), (False, False), ref_index(k * dt), ee, _tracking_errors(ee, trajs), cands,
                 tuple(new_results))
        if k * dt >= t_end and all(
            float(np.linalg.norm(ee[a] - trajs[a].waypoints[-1])) <= rho_d for a in range(2)
        ):
            completed = True
            break
    return book.finish(completed)
