"""End-to-end acceptance checks.

Each test records one ``PASS``/``FAIL`` line (shown in the terminal summary
under "acceptance criteria") and then asserts on the same condition.
"""

import math
import time

import numpy as np
import pytest

from cotransport.arm import fk_jacobian, forward_kinematics, solve_ik_leader
from cotransport.config import SimConfig
from cotransport.core import JointState, KinematicChain, Pose2D, RobotConfig, VelocityCommand
from cotransport.diff_drive import step_pose
from cotransport.guidance import PngState, pursue, reachability_radius
from cotransport.logs import read_log_csv, write_log_csv
from cotransport.mpc import MpcProblem, NU, cost_gradient, slq_solve, tool_position, total_cost
from cotransport.planner import (
    NoPathError,
    Roadmap,
    World2D,
    plan_path,
    shortest_path_indices,
)
from cotransport.scenario import build_benchmark_scenario
from cotransport.sync import run_simulation
from oracles import brute_force_shortest, fk_homogeneous_batch, rk4_unicycle_batch, segment_hits_polygon_dense

LOAD = 0.65


def _record(record_property, n, ok, detail):
    record_property("acceptance", f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def bench():
    cfg = SimConfig()
    sc = build_benchmark_scenario(cfg.n_d)
    logs, secs = {}, {}
    for method in ("png_lf", "rrt_lf", "slq_mpc"):
        t0 = time.perf_counter()
        logs[method] = run_simulation(sc, cfg, method, seed=0)
        secs[method] = time.perf_counter() - t0
    return sc, cfg, logs, secs


def _dev(log):
    return np.abs(log["load_len"] - LOAD)


def test_load_rigidity(bench, record_property):
    _, _, logs, secs = bench
    log = logs["png_lf"]
    ok_mask = log["ik2_ok"].astype(bool)
    frac = float(ok_mask.mean())
    worst = float(_dev(log)[ok_mask].max()) if ok_mask.any() else math.inf
    ok = log.completed and worst <= 1e-3 and frac >= 0.99 and secs["png_lf"] <= 60.0
    _record(record_property, 1, ok,
            f"max dev {worst:.3g} m on converged steps, follower converged {100 * frac:.1f}%, "
            f"{secs['png_lf']:.1f} s, completed={log.completed}")


def test_method_ordering(bench, record_property):
    _, _, logs, _ = bench
    d = {m: float(_dev(log).max()) for m, log in logs.items()}
    ok = d["png_lf"] <= d["rrt_lf"] <= d["slq_mpc"]
    _record(record_property, 2, ok,
            f"max dev png-lf {d['png_lf']:.3g} <= rrt-lf {d['rrt_lf']:.3g} <= slq-mpc {d['slq_mpc']:.3g}")


def test_leader_priority(bench, record_property):
    _, _, logs, _ = bench
    log = logs["png_lf"]
    e1, e2 = float(log["err1"].mean()), float(log["err2"].mean())
    _record(record_property, 3, e1 <= e2, f"mean tracking error leader {e1:.3g} m, follower {e2:.3g} m")


def _sync_violations(log):
    p = log["p"]
    bad = []
    if np.any(np.diff(p) < 0):
        bad.append("p decreases")
    for i in (1, 2):
        stop = log[f"stop{i}"].astype(bool)
        pose = np.column_stack([log[f"x{i}"], log[f"y{i}"], log[f"th{i}"]])
        cmd = np.column_stack([log[f"v{i}"], log[f"w{i}"]])
        for k in np.flatnonzero(stop):
            if k == 0 or not np.array_equal(pose[k], pose[k - 1]) or np.any(cmd[k] != 0.0):
                bad.append(f"robot {i} moved while stopped at row {k}")
    for k in np.flatnonzero(np.diff(p) > 0) + 1:
        if log["stop1"][k] or log["stop2"][k]:
            bad.append(f"stop flag set right after p advanced at row {k}")
    return bad


def test_stop_and_sync_invariants(bench, record_property):
    _, _, logs, _ = bench
    log = logs["png_lf"]
    bad = _sync_violations(log)
    stops = int(log["stop1"].sum() + log["stop2"].sum())
    advances = int(np.sum(np.diff(log["p"]) > 0))
    _record(record_property, 4, not bad,
            f"{len(log)} rows scanned, {advances} index advances, {stops} stopped robot-steps, "
            f"{len(bad)} violations" + (f" (first: {bad[0]})" if bad else ""))


def test_kinematics_oracles(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    cfg = RobotConfig()

    # differential drive against RK4
    n = 10_000
    states = np.column_stack([rng.uniform(-20, 20, n), rng.uniform(-20, 20, n), rng.uniform(-math.pi, math.pi, n)])
    v = rng.uniform(-cfg.v_max, cfg.v_max, n)
    w = rng.uniform(-cfg.omega_max, cfg.omega_max, n)
    w[::10] = 0.0  # include straight motion
    dt = rng.uniform(1e-3, 0.08, n)
    ref = rk4_unicycle_batch(states, v, w, dt)
    got = np.array([(q.x, q.y) for q in (step_pose(Pose2D(*s), VelocityCommand(a, b), h)
                                          for s, a, b, h in zip(states, v, w, dt))])
    dd_err = float(np.max(np.hypot(*(got - ref[:, :2]).T)))

    # FK-IK round trip on reachable, tool-level targets
    chain = KinematicChain()
    lo, hi = np.array(chain.lo), np.array(chain.hi)
    betas = []
    while len(betas) < 1000:
        b = rng.uniform(lo, hi)
        b[3] = -(b[1] + b[2])
        if lo[3] <= b[3] <= hi[3]:
            betas.append(b)
    targets = fk_homogeneous_batch(chain, np.array(betas))
    ik_err = 0.0
    for tgt in targets:
        start = JointState.for_chain(chain, rng.uniform(lo, hi))
        ik_err = max(ik_err, solve_ik_leader(chain, tgt, start, None).residual)

    # Jacobian against central differences
    jac_rel = 0.0
    h = 1e-6
    for b in rng.uniform(lo, hi, (100, 4)):
        fd = np.empty((3, 4))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            fd[:, k] = (forward_kinematics(chain, b + e) - forward_kinematics(chain, b - e)) / (2 * h)
        jac_rel = max(jac_rel, float(np.linalg.norm(fk_jacobian(chain, b) - fd) / np.linalg.norm(fd)))

    secs = time.perf_counter() - t0
    ok = dd_err <= 1e-6 and ik_err <= 1e-4 and jac_rel <= 1e-5 and secs <= 30.0
    _record(record_property, 5, ok,
            f"diff-drive vs RK4 {dd_err:.2g} m, IK round trip {ik_err:.2g} m, "
            f"Jacobian rel {jac_rel:.2g}, {secs:.1f} s")


def _random_graph(rng):
    n = int(rng.integers(2, 11))
    edges, adj = [], [dict() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.35:
                w = float(rng.integers(1, 6))
                edges.append((i, j, w))
                adj[i][j] = adj[j][i] = w
    return n, edges, Roadmap(rng.normal(size=(n, 2)), adj)


PLAN_WORLDS = [
    World2D((0, 0, 6, 4), (np.array([[2, 0], [3, 0], [3, 2.6], [2, 2.6]]),)),
    World2D((0, 0, 8, 6), (np.array([[2, 1], [3, 1], [3, 6], [2, 6]]),
                           np.array([[5, 0], [6, 0], [6, 4.5], [5, 4.5]]))),
]
PLAN_ENDS = [([0.5, 0.5], [5.5, 0.5]), ([1, 0.5], [7.5, 5.5])]


def test_planner_correctness(record_property):
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(100):
        n, edges, rm = _random_graph(rng)
        ref = brute_force_shortest(n, edges, 0, n - 1)
        try:
            _, d = shortest_path_indices(rm, 0, n - 1)
        except NoPathError:
            d = math.inf
        mismatches += d != ref

    hits, paths, repro = 0, 0, True
    for world, (a, b) in zip(PLAN_WORLDS, PLAN_ENDS):
        for seed in range(10):
            path, rm = plan_path(world, a, b, 200, 10, seed)
            again, rm2 = plan_path(world, a, b, 200, 10, seed)
            repro &= (np.array_equal(path, again) and np.array_equal(rm.vertices, rm2.vertices)
                      and rm.edges == rm2.edges)
            paths += 1
            hits += any(segment_hits_polygon_dense(p, q, poly, 4000)
                        for p, q in zip(path[:-1], path[1:]) for poly in world.obstacles)
    ok = mismatches == 0 and hits == 0 and repro
    _record(record_property, 6, ok,
            f"Dijkstra mismatches {mismatches}/100, colliding paths {hits}/{paths}, "
            f"seeded roadmaps reproduce: {repro}")


def _mpc_problem(rng, horizon=8):
    cfg = RobotConfig()
    x0 = np.concatenate([rng.uniform(-1, 1, 2), [rng.uniform(-2.5, 2.5)], rng.uniform(-0.5, 0.5, 4)])
    x0[6] = -(x0[4] + x0[5]) * 0.5
    heading = rng.uniform(-math.pi, math.pi)
    steps = np.arange(horizon + 1)[:, None] * 0.016
    ref = tool_position(x0, cfg)[0] + rng.normal(0, 0.05, 3) + steps * np.array([math.cos(heading), math.sin(heading), 0])
    U = rng.uniform(-0.5, 0.5, (horizon, NU)) * np.array([cfg.v_max, cfg.omega_max, 1, 1, 1, 1])
    return MpcProblem(ref, cfg, horizon), x0, U


def test_slq_mpc_health(bench, record_property):
    rng = np.random.default_rng(23)
    increases, grad_rel = 0, 0.0
    for _ in range(50):
        prob, x0, U = _mpc_problem(rng)
        res = slq_solve(prob, x0, U, max_iter=40)
        increases += any(b > a for a, b in zip(res.costs, res.costs[1:]))
        G = cost_gradient(prob, x0, U)
        fd = np.empty_like(U)
        h = 1e-6
        for idx in np.ndindex(*U.shape):
            e = np.zeros_like(U)
            e[idx] = h
            fd[idx] = (total_cost(prob, x0, U + e) - total_cost(prob, x0, U - e)) / (2 * h)
        grad_rel = max(grad_rel, float(np.linalg.norm(G - fd) / np.linalg.norm(fd)))
    log = bench[2]["slq_mpc"]
    errs = (float(log["err1"].mean()), float(log["err2"].mean()))
    bounded = all(math.isfinite(e) and e < 0.2 for e in errs)
    ok = increases == 0 and grad_rel <= 1e-4 and log.completed and bounded
    _record(record_property, 7, ok,
            f"cost increases {increases}/50, gradient rel err {grad_rel:.2g}, benchmark completed={log.completed}, "
            f"mean error leader {errs[0]:.3g} m follower {errs[1]:.3g} m")


def test_png_convergence(record_property, tmp_path_factory):
    cfg = RobotConfig()
    rng = np.random.default_rng(8)
    target = np.array([0.0, 0.0])
    rho = reachability_radius(cfg)
    failures = []
    for i in range(100):
        r = rng.uniform(rho, 3.0)  # starts inside rho_d would be trivial
        a = rng.uniform(-math.pi, math.pi)
        start = Pose2D(r * math.cos(a), r * math.sin(a), rng.uniform(-math.pi, math.pi))
        ok, poses = pursue(start, target, cfg, PngState(N=6.0), max_steps=5000)
        if not ok:
            failures.append((i, poses))
    detail = f"{100 - len(failures)}/100 starts entered rho_d={rho:.3f} m within 5000 steps"
    if failures:
        out = tmp_path_factory.mktemp("png_failures") / "failures.npz"
        np.savez(out, **{f"start{i}": poses for i, poses in failures})
        detail += f"; failing trajectories in {out}"
    _record(record_property, 8, len(failures) <= 1, detail)


def test_determinism_and_io(bench, record_property, tmp_path):
    sc, cfg, logs, _ = bench
    same_bytes, exact = True, True
    for method in ("png_lf", "rrt_lf"):
        again = run_simulation(sc, cfg, method, seed=0)
        first, second = tmp_path / f"{method}_1", tmp_path / f"{method}_2"
        first.mkdir()
        second.mkdir()
        a = write_log_csv(logs[method], first / "log.csv")
        b = write_log_csv(again, second / "log.csv")
        for suffix in (".csv", ".diag.csv", ".meta.json"):
            same_bytes &= a.with_suffix(suffix).read_bytes() == b.with_suffix(suffix).read_bytes()
        back = read_log_csv(a)
        exact &= all(np.array_equal(back[c], logs[method][c]) for c in logs[method].data)
        exact &= all(np.array_equal(back.diag[c], logs[method].diag[c]) for c in logs[method].diag)
        exact &= back.meta == logs[method].meta
    _record(record_property, 9, same_bytes and exact,
            f"repeat runs byte-identical: {same_bytes}, CSV read-back bit-exact: {exact}")
