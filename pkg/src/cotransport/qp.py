"""Dense primal active-set QP for tiny inequality-constrained problems.

Solves ``min 0.5 x'Hx + g'x  s.t.  A x <= b`` from a feasible start. Sizes here
are a handful of variables and about ten constraints, so everything is dense.
"""

from __future__ import annotations

import math

import numpy as np


def solve_qp(H, g, A, b, x0, max_iter: int = 100, tol: float = 1e-13, step_tol: float = 1e-11):
    """Return ``(x, n_iter)``. ``x0`` must satisfy ``A x0 <= b`` (up to ``tol``).

    Steps shorter than ``step_tol * (1 + |x|)`` plus the round-off level of the
    step (about ``eps * |grad| / lambda_min(H)``) count as zero; a tighter test
    lets that round-off keep the working set cycling.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, H.shape[0])
    b = np.asarray(b, dtype=float)
    x = np.array(x0, dtype=float)
    n = x.size
    work: list[int] = []
    lam_min = float(np.linalg.eigvalsh(H)[0])
    if lam_min <= 0:
        raise ValueError("H must be positive definite")
    noise = 1e-14 * math.sqrt(float((H @ x + g) @ (H @ x + g))) / lam_min
    for it in range(max_iter):
        gx = H @ x + g
        m = len(work)
        if m:
            # step restricted to the null space of the working constraints
            Aw = A[work]
            _, sv, Vt = np.linalg.svd(Aw)
            rank = int(np.sum(sv > 1e-12 * sv[0]))
            Z = Vt[rank:].T
            p = Z @ np.linalg.solve(Z.T @ H @ Z, -(Z.T @ gx)) if Z.shape[1] else np.zeros(n)
        else:
            p = np.linalg.solve(H, -gx)
        if math.sqrt(p @ p) <= step_tol * (1.0 + math.sqrt(x @ x)) + noise:
            if m == 0:
                return x, it + 1
            lam = np.linalg.lstsq(Aw.T, -gx, rcond=None)[0]
            if lam.min() >= -tol:
                return x, it + 1
            work.pop(int(np.argmin(lam)))
            continue
        Ap = A @ p
        cand = Ap > tol
        cand[work] = False
        alpha, block = 1.0, -1
        if cand.any():
            ratios = np.full(Ap.shape, np.inf)
            ratios[cand] = np.maximum(b[cand] - A[cand] @ x, 0.0) / Ap[cand]
            i = int(np.argmin(ratios))
            if ratios[i] < 1.0:
                alpha, block = float(ratios[i]), i
        x = x + alpha * p
        if block >= 0:
            work.append(block)
    return x, max_iter
