"""Proportional-navigation base tracker toward a stationary target point."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .core import Pose2D, RobotConfig, VelocityCommand, wrap_angle
from .diff_drive import step_pose


class DegenerateLOS(ValueError):
    """Base position coincides with the target, so the LOS angle is undefined."""


@dataclass(frozen=True)
class PngState:
    N: float = 6.0
    v_cruise: float = 0.2
    prev_los: Optional[float] = None

    def __post_init__(self):
        if self.N <= 0:
            raise ValueError("navigation constant must be positive")
        if self.v_cruise <= 0:
            raise ValueError("cruise speed must be positive")

    def reset(self) -> "PngState":
        """Forget the LOS history, e.g. after a target switch."""
        return replace(self, prev_los=None)


def los_angle(pose: Pose2D, target) -> float:
    dx, dy = float(target[0]) - pose.x, float(target[1]) - pose.y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateLOS(f"base at ({pose.x}, {pose.y}) coincides with target")
    return wrap_angle(math.atan2(dy, dx))


def png_step(
    state: PngState, pose: Pose2D, target, dt: float, cfg: RobotConfig
) -> Tuple[VelocityCommand, PngState]:
    """One guidance update.

    With LOS history, ``a_n = N * los_rate * v`` and ``omega = a_n / v``. Without
    it (first step toward a target) the base turns toward the LOS, in place
    while the target is more than 90 degrees off the heading.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.v_cruise > cfg.v_max:
        raise ValueError("cruise speed exceeds v_max")
    lam = los_angle(pose, target)
    v = state.v_cruise
    if state.prev_los is None:
        err = wrap_angle(lam - pose.theta)
        omega = min(max(err / dt, -cfg.omega_max), cfg.omega_max)
        if abs(err) > math.pi / 2:
            return VelocityCommand(0.0, omega), state
        return VelocityCommand(v, omega), replace(state, prev_los=lam)
    los_rate = wrap_angle(lam - state.prev_los) / dt
    a_n = state.N * los_rate * v
    omega = a_n / v
    omega = min(max(omega, -cfg.omega_max), cfg.omega_max)
    return VelocityCommand(v, omega), replace(state, prev_los=lam)


def reachability_radius(cfg: RobotConfig) -> float:
    return cfg.gamma * cfg.rho_l


def reached(pose: Pose2D, target, rho_d: float) -> bool:
    """Closed-ball test: a base exactly on the ring counts as arrived."""
    return math.hypot(float(target[0]) - pose.x, float(target[1]) - pose.y) <= rho_d


def distance_to(pose: Pose2D, target) -> float:
    return math.hypot(float(target[0]) - pose.x, float(target[1]) - pose.y)


def pursue(pose: Pose2D, target, cfg: RobotConfig, state: Optional[PngState] = None, max_steps: int = 5000):
    """Drive a single base to ``target`` with PNG; return ``(reached, poses)``."""
    state = state or PngState()
    rho_d = reachability_radius(cfg)
    poses = [pose]
    for _ in range(max_steps):
        if reached(pose, target, rho_d):
            return True, np.array([(p.x, p.y, p.theta) for p in poses])
        cmd, state = png_step(state, pose, target, cfg.dt, cfg)
        pose = step_pose(pose, cmd, cfg.dt)
        poses.append(pose)
    return reached(pose, target, rho_d), np.array([(p.x, p.y, p.theta) for p in poses])
