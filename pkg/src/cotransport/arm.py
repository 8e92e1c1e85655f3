"""Arm forward kinematics and the leader / follower constrained IK solves.

Both solves minimise ``||f(beta) - target||^2`` over the joint box intersected
with the per-step rate box, with the tool kept horizontal by eliminating the
last pitch joint. The follower additionally keeps its tool at distance ``l`` from
the leader's tool through an augmented Lagrangian on that equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import JointState, KinematicChain, Pose2D, RobotConfig, wrap_angle
from .diff_drive import arm_base_pose
from .qp import solve_qp

LOAD_TOL = 1e-4  # accepted |distance - l| for the follower
FIRST_ORDER_TOL = 1e-8
MAX_ITER = 200
RHO_MAX = 1e8
RESTART_TOL = 1e-6  # leader residual that counts as a poor local minimum


@dataclass(frozen=True)
class IkResult:
    beta_star: np.ndarray
    residual: float
    constraint_violation: float
    converged: bool
    iterations: int


def _pitch(v, phi):
    c, s = math.cos(phi), math.sin(phi)
    return (c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2])


def _dpitch(v, phi):
    c, s = math.cos(phi), math.sin(phi)
    return (-s * v[0] + c * v[2], 0.0, -c * v[0] - s * v[2])


def _fk_and_jac(chain: KinematicChain, beta, want_jac: bool):
    b1, b2, b3, b4 = (float(q) for q in beta)
    phis = (b2, b2 + b3, b2 + b3 + b4)
    l0 = chain.links[0]
    px, py, pz = l0
    rotated = []
    for link, phi in zip(chain.links[1:], phis):
        r = _pitch(link, phi)
        px += r[0]
        py += r[1]
        pz += r[2]
        rotated.append((link, phi))
    c1, s1 = math.cos(b1), math.sin(b1)
    bx, by, bz = chain.base_offset
    pos = np.array([bx + c1 * px - s1 * py, by + s1 * px + c1 * py, bz + pz])
    if not want_jac:
        return pos, None
    J = np.empty((3, 4))
    J[:, 0] = (-s1 * px - c1 * py, c1 * px - s1 * py, 0.0)
    # column j collects the pitch derivatives of every link after joint j
    for j in range(1, 4):
        dx = dy = dz = 0.0
        for link, phi in rotated[j - 1:]:
            d = _dpitch(link, phi)
            dx += d[0]
            dz += d[2]
        J[:, j] = (c1 * dx - s1 * dy, s1 * dx + c1 * dy, dz)
    return pos, J


def fk_batch(chain: KinematicChain, betas, want_jac: bool = False):
    """Row-wise forward kinematics for ``(n, 4)`` joint vectors; Jacobians ``(n, 3, 4)``."""
    B = np.atleast_2d(np.asarray(betas, dtype=float))
    phis = np.cumsum(B[:, 1:], axis=1)
    links = np.array(chain.links[1:])
    c, s = np.cos(phis), np.sin(phis)
    rx = c * links[:, 0] + s * links[:, 2]
    rz = -s * links[:, 0] + c * links[:, 2]
    l0 = chain.links[0]
    px = l0[0] + rx.sum(axis=1)
    py = np.full(len(B), l0[1] + links[:, 1].sum())
    pz = l0[2] + rz.sum(axis=1)
    c1, s1 = np.cos(B[:, 0]), np.sin(B[:, 0])
    bx, by, bz = chain.base_offset
    pos = np.column_stack([bx + c1 * px - s1 * py, by + s1 * px + c1 * py, bz + pz])
    if not want_jac:
        return pos, None
    J = np.zeros((len(B), 3, 4))
    J[:, 0, 0] = -s1 * px - c1 * py
    J[:, 1, 0] = c1 * px - s1 * py
    # d/dphi of each rotated link, summed over links after joint j
    dx = np.cumsum((-s * links[:, 0] + c * links[:, 2])[:, ::-1], axis=1)[:, ::-1]
    dz = np.cumsum((-c * links[:, 0] - s * links[:, 2])[:, ::-1], axis=1)[:, ::-1]
    J[:, 0, 1:] = c1[:, None] * dx
    J[:, 1, 1:] = s1[:, None] * dx
    J[:, 2, 1:] = dz
    return pos, J


def forward_kinematics(chain: KinematicChain, beta) -> np.ndarray:
    """Tool position in the arm-base frame."""
    return _fk_and_jac(chain, beta, False)[0]


def fk_jacobian(chain: KinematicChain, beta) -> np.ndarray:
    """Analytic 3x4 position Jacobian of :func:`forward_kinematics`."""
    return _fk_and_jac(chain, beta, True)[1]


def tool_pitch(beta) -> float:
    return float(beta[1] + beta[2] + beta[3])


def arm_base_position(platform: Pose2D, cfg: RobotConfig) -> np.ndarray:
    ab = arm_base_pose(platform, cfg)
    return np.array([ab.x, ab.y, cfg.mount_height])


def ee_world(platform: Pose2D, cfg: RobotConfig, beta) -> np.ndarray:
    """Tool position in the world frame."""
    ab = arm_base_pose(platform, cfg)
    p = forward_kinematics(cfg.arm, beta)
    c, s = math.cos(ab.theta), math.sin(ab.theta)
    return np.array([ab.x + c * p[0] - s * p[1], ab.y + s * p[0] + c * p[1], cfg.mount_height + p[2]])


def world_to_arm(platform: Pose2D, cfg: RobotConfig, point) -> np.ndarray:
    """Express a world point in the arm-base frame."""
    ab = arm_base_pose(platform, cfg)
    dx, dy = point[0] - ab.x, point[1] - ab.y
    c, s = math.cos(ab.theta), math.sin(ab.theta)
    return np.array([c * dx + s * dy, -s * dx + c * dy, point[2] - cfg.mount_height])


class _Feasible:
    """Feasible set in reduced coordinates ``z``, with ``beta = T z + t0``."""

    def __init__(self, chain: KinematicChain, lb: np.ndarray, ub: np.ndarray):
        self.chain = chain
        self.lb, self.ub = lb, ub
        c = chain.horizontal_pitch_sum
        if c is None:
            self.T = np.eye(4)
            self.t0 = np.zeros(4)
        else:
            self.T = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, -1]], dtype=float)
            self.t0 = np.array([0.0, 0.0, 0.0, c])
        self.A = np.vstack([self.T, -self.T])
        self.b = np.concatenate([ub - self.t0, self.t0 - lb])

    def beta(self, z) -> np.ndarray:
        return self.T @ z + self.t0

    def start(self, guess) -> Optional[np.ndarray]:
        """Feasible reduced point near ``guess`` (a 4-vector), or None."""
        lb, ub = self.lb, self.ub
        g = np.clip(np.asarray(guess, dtype=float), lb, ub)
        c = self.chain.horizontal_pitch_sum
        if c is None:
            return g
        s_lo = max(lb[1] + lb[2], c - ub[3])
        s_hi = min(ub[1] + ub[2], c - lb[3])
        if s_lo > s_hi + 1e-12:
            return None
        s = min(max(g[1] + g[2], s_lo), s_hi)
        b2_lo, b2_hi = max(lb[1], s - ub[2]), min(ub[1], s - lb[2])
        shift = (s - g[1] - g[2]) / 2.0
        b2 = min(max(g[1] + shift, b2_lo), b2_hi)
        b3 = min(max(s - b2, lb[2]), ub[2])
        z = np.array([g[0], b2, b3])
        slack = self.b - self.A @ z
        if slack.min() < -1e-9:
            return None
        return z


def _step_bounds(prev: JointState, dt: Optional[float]):
    lb, ub = prev.lo.copy(), prev.hi.copy()
    if dt is not None:
        lb = np.maximum(lb, prev.beta - prev.rate_limit * dt)
        ub = np.minimum(ub, prev.beta + prev.rate_limit * dt)
        # rate box and joint box never cross for an in-limit previous state
        ub = np.maximum(ub, lb)
    return lb, ub


def _residuals(chain, feas, z, target, anchor, l, lam, rho):
    beta = feas.beta(z)
    f, Jf = _fk_and_jac(chain, beta, True)
    r = f - target
    J = Jf @ feas.T
    if anchor is None:
        return r, J, 0.0
    diff = f - anchor
    dist = float(np.linalg.norm(diff))
    c = dist - l
    grad_c = (diff / max(dist, 1e-12)) @ J
    sr = math.sqrt(rho)
    R = np.append(r, sr * (c + lam / rho))
    JR = np.vstack([J, sr * grad_c])
    return R, JR, c


def _projected_gradient_norm(feas, z, grad) -> float:
    slack = feas.b - feas.A @ z
    if np.all(feas.A @ grad >= -slack):
        return float(np.linalg.norm(grad))  # -grad is itself feasible
    d, _ = solve_qp(np.eye(z.size), grad, feas.A, slack, np.zeros(z.size))
    return float(np.linalg.norm(d))


def _minimise(chain, feas, z, target, anchor, l, lam, rho, budget, tol):
    """Bounded Gauss-Newton / Levenberg-Marquardt on 0.5 * ||R(z)||^2."""
    mu = 1e-10
    R, JR, _ = _residuals(chain, feas, z, target, anchor, l, lam, rho)
    F = 0.5 * float(R @ R)
    used = 0
    while used < budget:
        used += 1
        grad = JR.T @ R
        if _projected_gradient_norm(feas, z, grad) <= tol:
            return z, used, True
        H = JR.T @ JR
        accepted = False
        for _ in range(30):
            d, _ = solve_qp(H + mu * np.eye(z.size), grad, feas.A, feas.b - feas.A @ z, np.zeros(z.size))
            z_new = z + d
            R_new, J_new, _ = _residuals(chain, feas, z_new, target, anchor, l, lam, rho)
            F_new = 0.5 * float(R_new @ R_new)
            if F_new <= F - 1e-4 * max(-(grad @ d), 0.0) and F_new <= F:
                accepted = True
                break
            mu = max(mu * 10.0, 1e-8)
        if not accepted:
            return z, used, False
        if F - F_new <= max(1e-30, 1e-15 * F) and np.linalg.norm(d) <= 1e-12 * (1.0 + np.linalg.norm(z)):
            return z_new, used, True
        z, R, JR, F = z_new, R_new, J_new, F_new
        mu = max(mu / 10.0, 1e-12)
    return z, used, False


def _solve(chain, target, prev: JointState, dt, anchor=None, l=0.0, start=None) -> IkResult:
    target = np.asarray(target, dtype=float)
    lb, ub = _step_bounds(prev, dt)
    feas = _Feasible(chain, lb, ub)
    z = feas.start(prev.beta if start is None else start)
    if z is None:
        beta = np.clip(prev.beta, lb, ub)
        return _result(chain, beta, target, anchor, l, False, 0)
    if anchor is None:
        z, used, ok = _minimise(chain, feas, z, target, None, 0.0, 0.0, 1.0, MAX_ITER, FIRST_ORDER_TOL)
        return _result(chain, feas.beta(z), target, None, 0.0, ok, used)
    anchor = np.asarray(anchor, dtype=float)
    lam, rho = 0.0, 1e2
    total, ok = 0, False
    c_prev = math.inf
    for _ in range(25):
        z, used, ok = _minimise(
            chain, feas, z, target, anchor, l, lam, rho, max(MAX_ITER - total, 1), FIRST_ORDER_TOL
        )
        total += used
        c = float(np.linalg.norm(forward_kinematics(chain, feas.beta(z)) - anchor)) - l
        if abs(c) <= 1e-10 or total >= MAX_ITER:
            break
        stalled = abs(c) > 0.25 * c_prev
        if stalled and rho >= RHO_MAX:
            break  # the equality cannot be met from here
        lam += rho * c
        if stalled:
            rho = min(rho * 10.0, RHO_MAX)
        c_prev = abs(c)
    return _result(chain, feas.beta(z), target, anchor, l, ok, total)


def _result(chain, beta, target, anchor, l, ok, iters) -> IkResult:
    f = forward_kinematics(chain, beta)
    residual = float(np.linalg.norm(f - target))
    violation = 0.0 if anchor is None else abs(float(np.linalg.norm(f - anchor)) - l)
    converged = bool(ok) and violation <= LOAD_TOL
    return IkResult(np.array(beta, dtype=float), residual, violation, converged, int(iters))


def _mid_range(prev: JointState) -> np.ndarray:
    return 0.5 * (prev.lo + prev.hi)


def branch_seeds(chain: KinematicChain, target) -> list:
    """Closed-form joint vectors for the pinned-pitch arm, one per yaw/elbow branch.

    With the tool pitch fixed the chain is a yaw joint over a planar two-link arm.
    Out-of-reach targets give the clamped (fully stretched or folded) pose, so the
    result is always usable as a starting point.
    """
    c = chain.horizontal_pitch_sum
    if c is None:
        return []
    l0, l1, l2, l3 = (np.asarray(v) for v in chain.links)
    dx = float(target[0]) - chain.base_offset[0]
    dy = float(target[1]) - chain.base_offset[1]
    lat = l0[1] + l1[1] + l2[1] + l3[1]  # pitch leaves the lateral offset alone
    rho = math.hypot(dx, dy)
    s = min(max(lat / rho, -1.0), 1.0) if rho > 0 else 0.0
    bearing = math.atan2(dy, dx)
    tip = np.array(_pitch(l3, c))
    out = []
    for flip in (False, True):
        yaw = bearing - math.asin(s) if not flip else bearing + math.asin(s) + math.pi
        fwd = rho * math.cos(math.asin(s)) * (-1.0 if flip else 1.0)
        # wrist in the (x, z) plane of the yaw frame
        wx = fwd - l0[0] - tip[0]
        wz = float(target[2]) - chain.base_offset[2] - l0[2] - tip[2]
        a1, a2 = math.atan2(l1[2], l1[0]), math.atan2(l2[2], l2[0])
        L1, L2 = math.hypot(l1[0], l1[2]), math.hypot(l2[0], l2[2])
        cos_d = min(max((wx * wx + wz * wz - L1 * L1 - L2 * L2) / (2 * L1 * L2), -1.0), 1.0)
        for sign in (1.0, -1.0):
            d = sign * math.acos(cos_d)
            # pitch rotates by -phi in the standard (x, z) orientation
            th1 = math.atan2(wz, wx) - math.atan2(L2 * math.sin(d), L1 + L2 * math.cos(d))
            th2 = th1 + d
            b2 = wrap_angle(a1 - th1)
            b3 = wrap_angle(a2 - th2 - b2)
            out.append(np.array([wrap_angle(yaw), b2, b3, c - b2 - b3]))
    return out


def _better(a: IkResult, b: IkResult) -> IkResult:
    """Prefer converged, then smaller violation, then smaller residual."""
    ka = (not a.converged, round(a.constraint_violation, 12), a.residual)
    kb = (not b.converged, round(b.constraint_violation, 12), b.residual)
    return a if ka <= kb else b


def _restarts(chain: KinematicChain, target, prev: JointState, dt) -> list:
    # inside a per-step rate box every seed is projected next to prev anyway
    if dt is not None:
        return []
    return [_mid_range(prev), *branch_seeds(chain, target)]


def solve_ik_leader(chain: KinematicChain, target_in_base, prev: JointState, dt: Optional[float]) -> IkResult:
    """Position IK with joint, rate and horizontal-tool constraints.

    ``dt=None`` drops the rate box (used to place the arm before a run starts).
    Never raises on solver failure; ``converged`` is False and the best iterate
    is returned instead. Without a rate box, a poor local minimum triggers
    restarts from the mid-range pose and the closed-form branch seeds.
    """
    res = _solve(chain, target_in_base, prev, dt)
    if not res.converged or res.residual > RESTART_TOL:
        for seed in _restarts(chain, target_in_base, prev, dt):
            res = _better(res, _solve(chain, target_in_base, prev, dt, start=seed))
            if res.converged and res.residual <= RESTART_TOL:
                break
    return res


def solve_ik_follower(
    chain: KinematicChain,
    target_in_base,
    prev: JointState,
    dt: Optional[float],
    leader_ee_world,
    own_base: Pose2D,
    cfg: RobotConfig,
    l: float,
) -> IkResult:
    """Position IK that keeps the tool at distance ``l`` from the leader's tool."""
    if l <= 0:
        raise ValueError("load length must be positive")
    anchor = world_to_arm(own_base, cfg, np.asarray(leader_ee_world, dtype=float))
    res = _solve(chain, target_in_base, prev, dt, anchor=anchor, l=l)
    if not res.converged:
        for seed in _restarts(chain, target_in_base, prev, dt):
            res = _better(res, _solve(chain, target_in_base, prev, dt, anchor=anchor, l=l, start=seed))
            if res.converged:
                break
    return res
