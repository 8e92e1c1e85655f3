import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotransport.core import RobotConfig
from cotransport.mpc import (
    NU,
    NX,
    MpcController,
    MpcProblem,
    cost_gradient,
    dynamics_jacobians,
    mpc_dynamics,
    relaxed_barrier,
    relaxed_barrier_derivs,
    rollout,
    slq_solve,
    tool_position,
    total_cost,
)

CFG = RobotConfig()


def random_problem(seed, horizon=8):
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([rng.uniform(-1, 1, 2), [rng.uniform(-2.5, 2.5)], rng.uniform(-0.5, 0.5, 4)])
    x0[6] = -(x0[4] + x0[5]) * 0.5
    start = tool_position(x0, CFG)[0]
    heading = rng.uniform(-math.pi, math.pi)
    steps = np.arange(horizon + 1)[:, None] * 0.016
    ref = start + rng.normal(0, 0.05, 3) + steps * np.array([math.cos(heading), math.sin(heading), 0.0])
    U = rng.uniform(-0.5, 0.5, (horizon, NU)) * np.array([0.26, 1.82, 1, 1, 1, 1])
    return MpcProblem(ref, CFG, horizon), x0, U


def test_barrier_values_and_continuity():
    d = 0.1
    assert relaxed_barrier(1.0, d) == 0.0
    assert relaxed_barrier(0.5, d) == pytest.approx(-math.log(0.5))
    below = relaxed_barrier(d - 1e-12, d)
    above = relaxed_barrier(d + 1e-12, d)
    assert below == pytest.approx(above, abs=1e-9)
    # finite and growing past the limit: soft, not hard
    assert math.isfinite(relaxed_barrier(-1.0, d))
    assert relaxed_barrier(-1.0, d) > relaxed_barrier(0.0, d) > relaxed_barrier(d, d)
    with pytest.raises(ValueError):
        relaxed_barrier(0.5, 0.0)


@given(st.floats(-2.0, 3.0), st.floats(0.01, 0.5), st.floats(0.1, 10))
def test_barrier_derivatives(z, delta, w):
    h = 1e-6
    v, d1, d2 = relaxed_barrier_derivs(np.array([z]), delta, w)
    assert v[0] == pytest.approx(relaxed_barrier(z, delta, w), rel=1e-12, abs=1e-12)
    fd1 = (relaxed_barrier(z + h, delta, w) - relaxed_barrier(z - h, delta, w)) / (2 * h)
    assert d1[0] == pytest.approx(fd1, rel=1e-4, abs=1e-4)
    _, a, _ = relaxed_barrier_derivs(np.array([z + h]), delta, w)
    _, b, _ = relaxed_barrier_derivs(np.array([z - h]), delta, w)
    assert d2[0] == pytest.approx((a[0] - b[0]) / (2 * h), rel=1e-4, abs=1e-4)
    assert d2[0] > 0


@given(st.integers(0, 10_000))
def test_dynamics_jacobians_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, NX)
    u = rng.uniform(-1, 1, NU)
    A, B = dynamics_jacobians(x, u, 0.08)
    h = 1e-7
    for k in range(NX):
        e = np.zeros(NX)
        e[k] = h
        fd = (mpc_dynamics(x + e, u, 0.08) - mpc_dynamics(x - e, u, 0.08)) / (2 * h)
        np.testing.assert_allclose(A[:, k], fd, atol=1e-7)
    for k in range(NU):
        e = np.zeros(NU)
        e[k] = h
        fd = (mpc_dynamics(x, u + e, 0.08) - mpc_dynamics(x, u - e, 0.08)) / (2 * h)
        np.testing.assert_allclose(B[:, k], fd, atol=1e-7)


@given(st.integers(0, 10_000))
def test_tool_jacobian_matches_finite_differences(seed):
    x = np.random.default_rng(seed).uniform(-1.5, 1.5, NX)
    _, J = tool_position(x, CFG, True)
    h = 1e-7
    for k in range(NX):
        e = np.zeros(NX)
        e[k] = h
        fd = (tool_position(x + e, CFG)[0] - tool_position(x - e, CFG)[0]) / (2 * h)
        np.testing.assert_allclose(J[:, k], fd, atol=1e-7)


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_cost_gradient_matches_finite_differences(seed):
    prob, x0, U = random_problem(seed)
    G = cost_gradient(prob, x0, U)
    h = 1e-6
    fd = np.empty_like(U)
    for idx in np.ndindex(*U.shape):
        e = np.zeros_like(U)
        e[idx] = h
        fd[idx] = (total_cost(prob, x0, U + e) - total_cost(prob, x0, U - e)) / (2 * h)
    assert np.linalg.norm(G - fd) <= 1e-4 * np.linalg.norm(fd)


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_slq_costs_never_increase(seed):
    prob, x0, U = random_problem(seed)
    res = slq_solve(prob, x0, U, max_iter=40)
    assert all(b <= a for a, b in zip(res.costs, res.costs[1:]))
    assert res.costs[-1] <= total_cost(prob, x0, U)
    np.testing.assert_allclose(res.states, rollout(prob, x0, res.inputs))


def test_slq_tracks_reachable_reference():
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 0.3, 0.2, -0.5])
    start = tool_position(x0, CFG)[0]
    ref = start + np.arange(21)[:, None] * np.array([0.012, 0.0, 0.0])
    res = slq_solve(MpcProblem(ref, CFG, 20), x0)
    assert res.converged
    X = res.states
    err = np.linalg.norm(np.array([tool_position(x, CFG)[0] for x in X]) - ref, axis=1)
    idle = np.linalg.norm(np.array([tool_position(x0, CFG)[0]] * 21) - ref, axis=1)
    # lag grows toward the horizon end (no terminal weight) but stays far below standing still
    assert err[:10].max() < 0.015
    assert err.mean() < 0.25 * idle.mean()


def test_problem_validation():
    with pytest.raises(ValueError):
        MpcProblem(np.zeros((5, 3)), CFG, 20)
    with pytest.raises(ValueError):
        MpcProblem(np.zeros((21, 3)), CFG, 20, delta=1.5)


def test_controller_warm_start_shifts():
    ctrl = MpcController(CFG, horizon=10, max_iter=20)
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 0.3, 0.2, -0.5])
    ref = tool_position(x0, CFG)[0] + np.arange(11)[:, None] * np.array([0.01, 0.0, 0.0])
    u = ctrl.step(x0, ref)
    assert u.shape == (NU,)
    np.testing.assert_array_equal(ctrl._warm[:-1], ctrl.last.inputs[1:])
