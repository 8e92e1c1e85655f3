"""Shared geometric types, frame helpers and polyline utilities.

Points are plain ``numpy`` arrays (shape ``(2,)`` or ``(3,)``); poses, commands
and configuration records are frozen dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to ``[-pi, pi)``."""
    if not math.isfinite(a):
        raise ValueError(f"cannot wrap non-finite angle {a!r}")
    r = math.fmod(a + math.pi, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    r -= math.pi
    # fmod/add rounding can land exactly on +pi
    if r >= math.pi:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0

    def clipped(self, v_max: float, omega_max: float) -> "VelocityCommand":
        return VelocityCommand(
            min(max(self.v, -v_max), v_max), min(max(self.omega, -omega_max), omega_max)
        )


STOP = VelocityCommand(0.0, 0.0)


@dataclass(frozen=True)
class Trajectory3D:
    """Ordered desired end-effector waypoints, shape ``(n_d, 3)``."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or w.shape[0] < 2:
            raise ValueError(f"trajectory needs shape (n>=2, 3), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("trajectory waypoints must be finite")
        if np.any(np.linalg.norm(np.diff(w, axis=0), axis=1) <= 0.0):
            raise ValueError("consecutive trajectory waypoints must be distinct")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    def __len__(self) -> int:
        return self.waypoints.shape[0]

    @property
    def xy(self) -> np.ndarray:
        """XY projection of the waypoints."""
        return self.waypoints[:, :2]

    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())


@dataclass(frozen=True)
class KinematicChain:
    """Yaw-pitch-pitch-pitch arm.

    ``base_offset`` locates the yaw joint in the arm-base frame. ``links[0]`` runs
    from the yaw joint to the first pitch joint (yaw frame); ``links[i]`` for
    i = 1..3 are expressed in the frame after the cumulative pitch of joints 2..i+1.
    Positive pitch tilts the +x axis downward. The tool points along the last
    link, so its pitch below horizontal is ``beta2 + beta3 + beta4``;
    ``horizontal_pitch_sum`` pins that sum (``None`` disables the constraint).
    """

    base_offset: Tuple[float, float, float] = (0.012, 0.0, 0.017)
    links: Tuple[Tuple[float, float, float], ...] = (
        (0.0, 0.0, 0.0595),
        (0.024, 0.0, 0.128),
        (0.124, 0.0, 0.0),
        (0.126, 0.0, 0.0),
    )
    lo: Tuple[float, ...] = (-0.9 * math.pi, -0.57 * math.pi, -0.3 * math.pi, -0.5 * math.pi)
    hi: Tuple[float, ...] = (0.9 * math.pi, 0.5 * math.pi, 0.44 * math.pi, 0.65 * math.pi)
    rate_limit: Tuple[float, ...] = (4.0, 4.0, 4.0, 4.0)
    horizontal_pitch_sum: Optional[float] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "base_offset", tuple(float(v) for v in self.base_offset))
        object.__setattr__(
            self, "links", tuple(tuple(float(v) for v in link) for link in self.links)
        )
        for name in ("lo", "hi", "rate_limit"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.links) != 4 or any(len(link) != 3 for link in self.links):
            raise ValueError("chain needs exactly 4 link offsets of length 3")
        if any(np.linalg.norm(link) <= 0.0 for link in self.links):
            raise ValueError("all link lengths must be positive")
        if len(self.lo) != 4 or len(self.hi) != 4 or len(self.rate_limit) != 4:
            raise ValueError("joint limits must be 4-vectors")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("joint lower limit above upper limit")
        if any(r <= 0 for r in self.rate_limit):
            raise ValueError("rate limits must be positive")

    @property
    def reach(self) -> float:
        """Maximum distance from the first pitch joint to the tool tip."""
        return float(sum(np.linalg.norm(link) for link in self.links[1:]))


@dataclass(frozen=True)
class JointState:
    beta: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    rate_limit: np.ndarray

    def __post_init__(self):
        for name in ("beta", "lo", "hi", "rate_limit"):
            arr = np.array(getattr(self, name), dtype=float).reshape(4)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def for_chain(cls, chain: KinematicChain, beta=None) -> "JointState":
        if beta is None:
            beta = np.clip(np.zeros(4), chain.lo, chain.hi)
        return cls(beta, chain.lo, chain.hi, chain.rate_limit)

    def with_beta(self, beta) -> "JointState":
        return JointState(beta, self.lo, self.hi, self.rate_limit)

    def within_limits(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.beta >= self.lo - tol) and np.all(self.beta <= self.hi + tol))


@dataclass(frozen=True)
class RobotConfig:
    """Platform limits, arm geometry and mounting.

    Velocity defaults are the TurtleBot3 Waffle Pi maxima. ``mount_offset`` is the
    planar position of the arm base in the platform frame and ``mount_height`` its
    height above the ground.
    """

    v_max: float = 0.26
    omega_max: float = 1.82
    rho_l: Optional[float] = None
    gamma: float = 0.4
    dt: float = 0.08
    arm: KinematicChain = field(default_factory=KinematicChain)
    mount_offset: Tuple[float, float] = (-0.22, 0.0)
    mount_height: float = 0.101

    def __post_init__(self):
        if self.rho_l is None:
            object.__setattr__(self, "rho_l", self.arm.reach)
        object.__setattr__(self, "mount_offset", tuple(float(v) for v in self.mount_offset))
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("velocity limits must be positive")
        if self.rho_l <= 0:
            raise ValueError("rho_l must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def project_point_to_polyline(p, poly) -> Tuple[np.ndarray, int, float]:
    """Globally nearest point on a 2D polyline.

    Returns ``(foot, segment_index, t)`` with ``t`` the clamped parameter on the
    segment. Exact distance ties resolve to the lowest segment index.
    """
    poly = np.asarray(poly, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 2:
        raise ValueError("polyline needs at least one segment")
    p = np.asarray(p, dtype=float)[:2]
    a = poly[:-1, :2]
    d = poly[1:, :2] - a
    len2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(len2 > 0.0, len2, 1.0)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / safe, 0.0, 1.0)
    t = np.where(len2 > 0.0, t, 0.0)
    feet = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", feet - p, feet - p)
    i = int(np.argmin(dist2))
    return feet[i].copy(), i, float(t[i])


def lift_to_trajectory(traj: Trajectory3D, segment_index: int, t: float) -> np.ndarray:
    """Linear interpolation of the 3D waypoints on one segment."""
    w = traj.waypoints
    if not 0 <= segment_index < len(w) - 1:
        raise IndexError(f"segment index {segment_index} out of range for {len(w)} waypoints")
    if t == 0.0:
        return w[segment_index].copy()
    if t == 1.0:
        return w[segment_index + 1].copy()
    return w[segment_index] * (1.0 - t) + w[segment_index + 1] * t


def nearest_on_trajectory(p, traj: Trajectory3D) -> np.ndarray:
    """Project ``p`` onto the XY polyline of ``traj`` and lift the foot to 3D."""
    _, i, t = project_point_to_polyline(p, traj.xy)
    return lift_to_trajectory(traj, i, t)
