"""Random velocity-sampling base tracker (the sampling-tree comparator)."""

from __future__ import annotations

import numpy as np

from .core import Pose2D, RobotConfig, VelocityCommand
from .diff_drive import OMEGA_EPS

OBJECTIVES = ("ring", "nearest")


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_velocities(count: int, v_max: float, omega_max: float, rng) -> np.ndarray:
    """``count`` uniform ``(v, omega)`` rows over the full command box."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _as_rng(rng)
    u = rng.random((count, 2))
    return np.column_stack([(2.0 * u[:, 0] - 1.0) * v_max, (2.0 * u[:, 1] - 1.0) * omega_max])


def step_poses(pose: Pose2D, cmds: np.ndarray, dt: float) -> np.ndarray:
    """Vectorised arc-model step of one pose under many commands; rows ``(x, y, theta)``."""
    v, w = cmds[:, 0], cmds[:, 1]
    th = pose.theta
    th1 = th + w * dt
    straight = np.abs(w) < OMEGA_EPS
    safe_w = np.where(straight, 1.0, w)
    r = v / safe_w
    x = np.where(straight, pose.x + v * dt * np.cos(th), pose.x + r * (np.sin(th1) - np.sin(th)))
    y = np.where(straight, pose.y + v * dt * np.sin(th), pose.y - r * (np.cos(th1) - np.cos(th)))
    return np.column_stack([x, y, th1])


def sampling_objective(next_xy: np.ndarray, target, rho_d: float, objective: str = "ring") -> np.ndarray:
    d = np.hypot(next_xy[:, 0] - target[0], next_xy[:, 1] - target[1])
    if objective == "ring":
        return np.abs(d - rho_d)
    if objective == "nearest":
        return d
    raise ValueError(f"unknown sampling objective {objective!r}; expected one of {OBJECTIVES}")


def velocity_sampling_step(
    pose: Pose2D,
    target,
    rho_d: float,
    cfg: RobotConfig,
    rng,
    count: int = 500,
    objective: str = "ring",
) -> VelocityCommand:
    """Best of ``count`` random commands after one ``cfg.dt`` roll-out.

    ``objective="ring"`` scores ``|d - rho_d|``; ``"nearest"`` scores ``d``.
    The first minimal sample wins ties.
    """
    cmds = sample_velocities(count, cfg.v_max, cfg.omega_max, rng)
    nxt = step_poses(pose, cmds, cfg.dt)
    J = sampling_objective(nxt, target, rho_d, objective)
    i = int(np.argmin(J))
    return VelocityCommand(float(cmds[i, 0]), float(cmds[i, 1]))
