"""Differential-drive forward kinematics (circular-arc model)."""

from __future__ import annotations

import math

from .core import Pose2D, RobotConfig, VelocityCommand, wrap_angle

OMEGA_EPS = 1e-6


def step_pose(pose: Pose2D, cmd: VelocityCommand, dt: float, omega_eps: float = OMEGA_EPS) -> Pose2D:
    """Advance ``pose`` by one period under a constant ``(v, omega)``.

    Exact along the circle of radius ``v/omega``; below ``omega_eps`` the arc is
    replaced by a straight segment.
    """
    v, w = cmd.v, cmd.omega
    if not all(math.isfinite(q) for q in (pose.x, pose.y, pose.theta, v, w, dt)):
        raise ValueError("step_pose got non-finite input")
    if dt <= 0:
        raise ValueError("dt must be positive")
    th = pose.theta
    if abs(w) < omega_eps:
        return Pose2D(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th + w * dt)
    r = v / w
    th1 = th + w * dt
    return Pose2D(
        pose.x + r * (math.sin(th1) - math.sin(th)),
        pose.y - r * (math.cos(th1) - math.cos(th)),
        wrap_angle(th1),
    )


def arm_base_pose(platform: Pose2D, cfg: RobotConfig) -> Pose2D:
    """Planar pose of the arm base in the world frame."""
    ox, oy = cfg.mount_offset
    c, s = math.cos(platform.theta), math.sin(platform.theta)
    return Pose2D(platform.x + c * ox - s * oy, platform.y + s * ox + c * oy, platform.theta)
