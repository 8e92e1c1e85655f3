"""Sequential linear-quadratic (iLQR-style) MPC for one mobile manipulator.

State ``x = [x, y, theta, beta1..beta4]``, input ``u = [v, omega, dbeta1..dbeta4]``.
The cost tracks the world-frame tool position against a time-indexed reference
and softens input and joint limits with relaxed log barriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .arm import _fk_and_jac, fk_batch
from .core import RobotConfig, wrap_angle

NX, NU = 7, 6


def relaxed_barrier(z: float, delta: float, weight: float = 1.0) -> float:
    """Log barrier ``-ln z`` continued by a quadratic below ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if z > delta:
        return -weight * math.log(z)
    return weight * (0.5 * (((z - 2.0 * delta) / delta) ** 2 - 1.0) - math.log(delta))


def relaxed_barrier_derivs(z: np.ndarray, delta: float, weight: float):
    """Value, first and second derivative, elementwise."""
    z = np.asarray(z, dtype=float)
    inner = z > delta
    zs = np.where(inner, z, 1.0)
    val = np.where(inner, -np.log(zs), 0.5 * (((z - 2 * delta) / delta) ** 2 - 1.0) - math.log(delta))
    d1 = np.where(inner, -1.0 / zs, (z - 2 * delta) / delta**2)
    d2 = np.where(inner, 1.0 / zs**2, 1.0 / delta**2)
    return weight * val, weight * d1, weight * d2


@dataclass
class MpcProblem:
    reference: np.ndarray  # (N+1, 3) tool reference for steps 0..N
    cfg: RobotConfig
    horizon: int = 20
    q: np.ndarray = field(default_factory=lambda: np.full(3, 100.0))
    r: np.ndarray = field(default_factory=lambda: np.full(NU, 0.1))
    delta: float = 0.1
    barrier_weight: float = 1.0
    dt: float = 0.08

    def __post_init__(self):
        self.reference = np.asarray(self.reference, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(3)
        self.r = np.asarray(self.r, dtype=float).reshape(NU)
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.reference.shape != (self.horizon + 1, 3):
            raise ValueError(f"reference must have shape ({self.horizon + 1}, 3)")
        if np.any(self.q <= 0) or np.any(self.r <= 0):
            raise ValueError("weights must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("barrier delta must lie in (0, 1)")
        arm = self.cfg.arm
        self.u_hi = np.array([self.cfg.v_max, self.cfg.omega_max, *arm.rate_limit])
        self.u_lo = -self.u_hi
        self.x_lo = np.array(arm.lo)
        self.x_hi = np.array(arm.hi)


def mpc_dynamics(x, u, dt: float) -> np.ndarray:
    """Forward-Euler step of the unicycle base plus integrating joints."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    th = x[2]
    out = x.copy()
    out[0] += dt * u[0] * math.cos(th)
    out[1] += dt * u[0] * math.sin(th)
    out[2] = wrap_angle(th + dt * u[1])
    out[3:] += dt * u[2:]
    return out


def dynamics_jacobians(x, u, dt: float):
    th = x[2]
    c, s = math.cos(th), math.sin(th)
    A = np.eye(NX)
    A[0, 2] = -dt * u[0] * s
    A[1, 2] = dt * u[0] * c
    B = np.zeros((NX, NU))
    B[0, 0] = dt * c
    B[1, 0] = dt * s
    B[2, 1] = dt
    B[3:, 2:] = dt * np.eye(4)
    return A, B


def tool_position(x, cfg: RobotConfig, want_jac: bool = False):
    """World tool position for state ``x`` and optionally its 3x7 Jacobian."""
    p, Jf = _fk_and_jac(cfg.arm, x[3:], want_jac)
    th = x[2]
    c, s = math.cos(th), math.sin(th)
    ox, oy = cfg.mount_offset
    lx, ly = ox + p[0], oy + p[1]
    pos = np.array([x[0] + c * lx - s * ly, x[1] + s * lx + c * ly, cfg.mount_height + p[2]])
    if not want_jac:
        return pos, None
    J = np.zeros((3, NX))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = -s * lx - c * ly
    J[1, 2] = c * lx - s * ly
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    J[:, 3:] = rot @ Jf
    return pos, J


def _barrier_terms(val, lo, hi, delta, weight):
    """Two-sided normalised barrier on ``val`` (any shape, last axis matches bounds)."""
    span = hi - lo
    bu, du, hu = relaxed_barrier_derivs((hi - val) / span, delta, weight)
    bl, dl, hl = relaxed_barrier_derivs((val - lo) / span, delta, weight)
    return bu + bl, (dl - du) / span, (hu + hl) / span**2


def _tool_errors(problem: MpcProblem, X, derivs: bool):
    cfg = problem.cfg
    P, Jf = fk_batch(cfg.arm, X[:, 3:], derivs)
    c, s = np.cos(X[:, 2]), np.sin(X[:, 2])
    lx = cfg.mount_offset[0] + P[:, 0]
    ly = cfg.mount_offset[1] + P[:, 1]
    pos = np.column_stack([X[:, 0] + c * lx - s * ly, X[:, 1] + s * lx + c * ly, cfg.mount_height + P[:, 2]])
    E = pos - problem.reference[: len(X)]
    if not derivs:
        return E, None
    J = np.zeros((len(X), 3, NX))
    J[:, 0, 0] = 1.0
    J[:, 1, 1] = 1.0
    J[:, 0, 2] = -s * lx - c * ly
    J[:, 1, 2] = c * lx - s * ly
    J[:, 0, 3:] = c[:, None] * Jf[:, 0] - s[:, None] * Jf[:, 1]
    J[:, 1, 3:] = s[:, None] * Jf[:, 0] + c[:, None] * Jf[:, 1]
    J[:, 2, 3:] = Jf[:, 2]
    return E, J


def trajectory_cost(problem: MpcProblem, X, U) -> float:
    """Total cost of a state sequence ``X`` (N+1 rows) under inputs ``U`` (N rows)."""
    E, _ = _tool_errors(problem, X, False)
    cost = float(np.einsum("ti,i,ti->", E, problem.q, E))
    cost += float(np.einsum("ti,i,ti->", U, problem.r, U))
    bx, _, _ = _barrier_terms(X[:, 3:], problem.x_lo, problem.x_hi, problem.delta, problem.barrier_weight)
    bu, _, _ = _barrier_terms(U, problem.u_lo, problem.u_hi, problem.delta, problem.barrier_weight)
    return cost + float(bx.sum()) + float(bu.sum())


def trajectory_derivs(problem: MpcProblem, X, U):
    """Gradients and Gauss-Newton Hessians of the cost along a rollout.

    Returns ``(lx, lxx, lu, luu)`` with shapes ``(N+1, 7)``, ``(N+1, 7, 7)``,
    ``(N, 6)`` and ``(N, 6, 6)``; the input Hessian is diagonal.
    """
    E, J = _tool_errors(problem, X, True)
    qE = problem.q * E
    lx = 2.0 * np.einsum("tij,ti->tj", J, qE)
    lxx = 2.0 * np.einsum("tij,i,tik->tjk", J, problem.q, J)
    _, gx, hx = _barrier_terms(X[:, 3:], problem.x_lo, problem.x_hi, problem.delta, problem.barrier_weight)
    lx[:, 3:] += gx
    idx = np.arange(3, NX)
    lxx[:, idx, idx] += hx
    _, gu, hu = _barrier_terms(U, problem.u_lo, problem.u_hi, problem.delta, problem.barrier_weight)
    lu = 2.0 * problem.r * U + gu
    luu = np.zeros((len(U), NU, NU))
    iu = np.arange(NU)
    luu[:, iu, iu] = 2.0 * problem.r + hu
    return lx, lxx, lu, luu


def rollout(problem: MpcProblem, x0, U) -> np.ndarray:
    X = np.empty((problem.horizon + 1, NX))
    X[0] = x0
    for t in range(problem.horizon):
        X[t + 1] = mpc_dynamics(X[t], U[t], problem.dt)
    return X


def total_cost(problem: MpcProblem, x0, U) -> float:
    U = np.asarray(U, dtype=float)
    return trajectory_cost(problem, rollout(problem, x0, U), U)


def cost_gradient(problem: MpcProblem, x0, U) -> np.ndarray:
    """Exact gradient of :func:`total_cost` with respect to ``U`` (adjoint sweep)."""
    U = np.asarray(U, dtype=float)
    X = rollout(problem, x0, U)
    lx, _, lu, _ = trajectory_derivs(problem, X, U)
    N = problem.horizon
    lam = lx[N]
    G = np.empty((N, NU))
    for t in range(N - 1, -1, -1):
        A, B = dynamics_jacobians(X[t], U[t], problem.dt)
        G[t] = lu[t] + B.T @ lam
        lam = lx[t] + A.T @ lam
    return G


@dataclass
class SlqResult:
    inputs: np.ndarray
    states: np.ndarray
    costs: List[float]
    iterations: int
    converged: bool
    line_search_failed: bool = False


def _state_diff(a, b):
    d = a - b
    d[2] = wrap_angle(d[2])
    return d


def slq_solve(
    problem: MpcProblem,
    x0,
    u_init: Optional[np.ndarray] = None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> SlqResult:
    """Linearise, solve the LQ subproblem by a Riccati sweep, line-search; repeat.

    Accepted iterates strictly decrease the cost, so ``costs`` is non-increasing.
    """
    N = problem.horizon
    x0 = np.asarray(x0, dtype=float)
    U = np.zeros((N, NU)) if u_init is None else np.array(u_init, dtype=float)
    X = rollout(problem, x0, U)
    J = trajectory_cost(problem, X, U)
    costs = [J]
    mu = 1e-6
    converged = False
    ls_failed = False
    it = 0
    while it < max_iter:
        it += 1
        # quadratic model about the current rollout
        lxs, lxxs, lus, luus = trajectory_derivs(problem, X, U)
        Vx, Vxx = lxs[N], lxxs[N]
        jac = [dynamics_jacobians(X[t], U[t], problem.dt) for t in range(N)]
        ks = np.empty((N, NU))
        Ks = np.empty((N, NU, NX))
        expected = 0.0
        for t in range(N - 1, -1, -1):
            lx, lxx, lu, luu = lxs[t], lxxs[t], lus[t], luus[t]
            A, B = jac[t]
            Qx = lx + A.T @ Vx
            Qu = lu + B.T @ Vx
            VB = Vxx @ B
            Qxx = lxx + A.T @ Vxx @ A
            Quu = luu + B.T @ VB + mu * np.eye(NU)
            Qux = VB.T @ A
            Quu = 0.5 * (Quu + Quu.T)
            sol = -np.linalg.solve(Quu, np.column_stack([Qu, Qux]))
            k, K = sol[:, 0], sol[:, 1:]
            ks[t], Ks[t] = k, K
            expected += float(k @ Qu)
            Vx = Qx + K.T @ Quu @ k + K.T @ Qu + Qux.T @ k
            Vxx = Qxx + K.T @ Quu @ K + K.T @ Qux + Qux.T @ K
            Vxx = 0.5 * (Vxx + Vxx.T)
        accepted = False
        alpha = 1.0
        while alpha >= 1e-4:
            Xn = np.empty_like(X)
            Un = np.empty_like(U)
            Xn[0] = x0
            for t in range(N):
                Un[t] = U[t] + alpha * ks[t] + Ks[t] @ _state_diff(Xn[t], X[t])
                Xn[t + 1] = mpc_dynamics(Xn[t], Un[t], problem.dt)
            Jn = trajectory_cost(problem, Xn, Un)
            if Jn < J:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if abs(expected) < tol:
                converged = True
                break
            mu *= 10.0
            if mu > 1e8:
                ls_failed = True
                break
            continue
        decrease = J - Jn
        X, U, J = Xn, Un, Jn
        costs.append(J)
        mu = max(mu / 10.0, 1e-9)
        if decrease < tol:
            converged = True
            break
    return SlqResult(U, X, costs, it, converged, ls_failed)


class MpcController:
    """Receding-horizon wrapper with shifted warm starts."""

    def __init__(self, cfg: RobotConfig, horizon=20, q=100.0, r=0.1, delta=0.1, barrier_weight=1.0,
                 max_iter=100, tol=1e-8):
        self.cfg = cfg
        self.horizon = horizon
        self.q = np.full(3, q) if np.isscalar(q) else np.asarray(q, float)
        self.r = np.full(NU, r) if np.isscalar(r) else np.asarray(r, float)
        self.delta = delta
        self.barrier_weight = barrier_weight
        self.max_iter = max_iter
        self.tol = tol
        self._warm: Optional[np.ndarray] = None
        self.last: Optional[SlqResult] = None

    def problem(self, reference) -> MpcProblem:
        return MpcProblem(reference, self.cfg, self.horizon, self.q, self.r, self.delta,
                          self.barrier_weight, self.cfg.dt)

    def step(self, x0, reference) -> np.ndarray:
        """Solve from ``x0`` and return the first input; keep the tail as warm start."""
        res = slq_solve(self.problem(reference), x0, self._warm, self.max_iter, self.tol)
        self.last = res
        self._warm = np.vstack([res.inputs[1:], res.inputs[-1:]])
        return res.inputs[0].copy()


def mpc_controller_step(controller: MpcController, x0, reference) -> np.ndarray:
    return controller.step(x0, reference)
