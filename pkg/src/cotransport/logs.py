"""Simulation logs, their CSV form, and summary metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .core import Trajectory3D, nearest_on_trajectory


def _robot_cols(i: int) -> List[str]:
    return [f"x{i}", f"y{i}", f"th{i}", f"v{i}", f"w{i}", *(f"b{i}_{j}" for j in range(1, 5)),
            f"ee{i}_x", f"ee{i}_y", f"ee{i}_z", f"stop{i}"]


COLUMNS = ["t", *_robot_cols(1), *_robot_cols(2), "p", "load_len", "err1", "err2"]
DIAG_COLUMNS = ["t", "cand1_x", "cand1_y", "cand1_z", "cand2_x", "cand2_y", "cand2_z",
                "ik1_ok", "ik2_ok", "ik1_residual", "ik2_residual", "ik2_violation", "ik1_iters", "ik2_iters"]
INT_COLUMNS = {"stop1", "stop2", "p", "ik1_ok", "ik2_ok", "ik1_iters", "ik2_iters"}


class LogIOError(OSError):
    pass


@dataclass
class SimulationLog:
    data: Dict[str, np.ndarray]
    diag: Dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.data["t"])

    def __getitem__(self, key: str) -> np.ndarray:
        return self.data[key] if key in self.data else self.diag[key]

    @property
    def completed(self) -> bool:
        return bool(self.meta.get("completed", False))

    def ee(self, robot: int) -> np.ndarray:
        i = robot + 1
        return np.column_stack([self.data[f"ee{i}_x"], self.data[f"ee{i}_y"], self.data[f"ee{i}_z"]])

    def poses(self, robot: int) -> np.ndarray:
        i = robot + 1
        return np.column_stack([self.data[f"x{i}"], self.data[f"y{i}"], self.data[f"th{i}"]])


class LogBuilder:
    """Accumulates rows during a run; row ``k`` sits at ``t = k * dt``."""

    def __init__(self, dt: float, meta: Optional[dict] = None):
        self.dt = dt
        self.meta = dict(meta or {})
        self.rows: List[list] = []
        self.diag_rows: List[list] = []

    def add(self, robots, cmds, stops, p, ee, errs, cands, results):
        t = len(self.rows) * self.dt
        row = [t]
        for a in range(2):
            r = robots[a]
            row += [r.pose.x, r.pose.y, r.pose.theta, cmds[a].v, cmds[a].omega, *r.joints.beta,
                    *ee[a], int(bool(stops[a]))]
        row += [int(p) + 1, float(np.linalg.norm(np.asarray(ee[0]) - np.asarray(ee[1]))), errs[0], errs[1]]
        self.rows.append(row)
        self.diag_rows.append([t, *cands[0], *cands[1], int(results[0].converged), int(results[1].converged),
                               results[0].residual, results[1].residual, results[1].constraint_violation,
                               results[0].iterations, results[1].iterations])

    def finish(self, completed: bool) -> SimulationLog:
        arr = np.array(self.rows, dtype=float)
        darr = np.array(self.diag_rows, dtype=float)
        meta = dict(self.meta, completed=bool(completed), steps=len(self.rows) - 1, dt=self.dt)
        return SimulationLog({c: arr[:, i].copy() for i, c in enumerate(COLUMNS)},
                             {c: darr[:, i].copy() for i, c in enumerate(DIAG_COLUMNS)}, meta)


def _fmt(name: str, v: float) -> str:
    return str(int(v)) if name in INT_COLUMNS else format(float(v), ".17g")


def _write_table(path: Path, cols: List[str], table: Dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(len(table[cols[0]])):
            w.writerow([_fmt(c, table[c][i]) for c in cols])


def write_log_csv(log: SimulationLog, path) -> Path:
    """Write ``<path>`` (fixed columns), ``<stem>.diag.csv`` and ``<stem>.meta.json``."""
    path = Path(path)
    try:
        _write_table(path, COLUMNS, log.data)
        if log.diag:
            _write_table(path.with_suffix(".diag.csv"), DIAG_COLUMNS, log.diag)
        path.with_suffix(".meta.json").write_text(json.dumps(log.meta, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise LogIOError(f"cannot write log to {path}: {exc}") from exc
    return path


def _read_table(path: Path, expected: List[str]) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != expected:
        raise ValueError(f"{path}: unexpected CSV header")
    body = rows[1:]
    if any(len(r) != len(expected) for r in body):
        raise ValueError(f"{path}: ragged CSV rows")
    arr = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(expected))
    return {c: arr[:, i].copy() for i, c in enumerate(expected)}


def read_log_csv(path) -> SimulationLog:
    path = Path(path)
    try:
        data = _read_table(path, COLUMNS)
        diag_path = path.with_suffix(".diag.csv")
        diag = _read_table(diag_path, DIAG_COLUMNS) if diag_path.exists() else {}
        meta_path = path.with_suffix(".meta.json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    except OSError as exc:
        raise LogIOError(f"cannot read log {path}: {exc}") from exc
    return SimulationLog(data, diag, meta)


def load_length_series(log: SimulationLog) -> np.ndarray:
    return np.linalg.norm(log.ee(0) - log.ee(1), axis=1)


def tracking_error_series(log: SimulationLog, trajs) -> tuple:
    """Per-step distance of each tool to its nearest desired-trajectory point."""
    out = []
    for a in range(2):
        ee = log.ee(a)
        out.append(np.array([np.linalg.norm(e - nearest_on_trajectory(e, trajs[a])) for e in ee]))
    return tuple(out)


def summarize(log: SimulationLog, load_length: Optional[float] = None) -> dict:
    l = float(log.meta.get("load_length", 0.65) if load_length is None else load_length)
    dev = np.abs(log.data["load_len"] - l)
    out = {
        "method": log.meta.get("method"),
        "steps": len(log) - 1,
        "duration_s": float(log.data["t"][-1]),
        "completed": log.completed,
        "max_load_dev": float(dev.max()),
        "mean_load_dev": float(dev.mean()),
        "mean_err_leader": float(log.data["err1"].mean()),
        "mean_err_follower": float(log.data["err2"].mean()),
    }
    if log.diag:
        ok = log.diag["ik2_ok"].astype(bool)
        out["follower_converged_frac"] = float(ok.mean())
        out["max_load_dev_converged"] = float(dev[ok].max()) if ok.any() else float("nan")
    return out
