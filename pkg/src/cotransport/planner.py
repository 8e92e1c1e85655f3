"""Probabilistic roadmap over a 2D polygon world, Dijkstra search, and the
conversion of a planned path into the two end-effector trajectories."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import Trajectory3D

WORLD_HEADER = "cotransport-world 1"
EPS = 1e-12


class PlanningError(RuntimeError):
    """Sampling budget exhausted, offset trajectory in collision, and the like."""


class NoPathError(PlanningError):
    """Start and goal lie in different roadmap components."""


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _as_ccw_polygon(vertices) -> np.ndarray:
    poly = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if poly.shape[0] < 3:
        raise ValueError("polygon needs at least 3 vertices")
    area2 = float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1]))
    if abs(area2) <= EPS:
        raise ValueError("polygon vertices are collinear")
    if area2 < 0:
        poly = poly[::-1].copy()
    n = len(poly)
    for i in range(n):
        if _cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) < -EPS:
            raise ValueError("obstacle polygons must be convex")
    return poly


@dataclass(frozen=True)
class World2D:
    """Axis-aligned bounds ``(xmin, ymin, xmax, ymax)`` and convex CCW obstacles."""

    bounds: Tuple[float, float, float, float]
    obstacles: Tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(v) for v in self.bounds)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("degenerate world bounds")
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        polys = tuple(_as_ccw_polygon(p) for p in self.obstacles)
        for poly in polys:
            if (poly[:, 0].min() < xmin or poly[:, 0].max() > xmax
                    or poly[:, 1].min() < ymin or poly[:, 1].max() > ymax):
                raise ValueError("obstacle vertex outside world bounds")
        object.__setattr__(self, "obstacles", polys)

    def in_bounds(self, p) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

    def is_free(self, p) -> bool:
        return self.in_bounds(p) and not any(point_in_polygon(p, poly) for poly in self.obstacles)

    def inflated(self, radius: float) -> "World2D":
        """Obstacles grown outward by ``radius`` (mitred edges).

        Bounds grow by the mitre reach so grown vertices stay inside them; sample
        against the original bounds.
        """
        if radius <= 0:
            return self
        grown = []
        for poly in self.obstacles:
            n = len(poly)
            lines = []
            for i in range(n):
                a, b = poly[i], poly[(i + 1) % n]
                d = (b - a) / np.linalg.norm(b - a)
                normal = np.array([d[1], -d[0]])  # outward for CCW
                lines.append((a + radius * normal, d))
            verts = []
            for i in range(n):
                (p1, d1), (p2, d2) = lines[i - 1], lines[i]
                den = d1[0] * d2[1] - d1[1] * d2[0]
                if abs(den) <= EPS:
                    verts.append(p2)
                    continue
                s = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / den
                verts.append(p1 + s * d1)
            grown.append(np.array(verts))
        xmin, ymin, xmax, ymax = self.bounds
        if grown:
            allv = np.vstack(grown)
            xmin, ymin = min(xmin, allv[:, 0].min()), min(ymin, allv[:, 1].min())
            xmax, ymax = max(xmax, allv[:, 0].max()), max(ymax, allv[:, 1].max())
        return World2D((xmin, ymin, xmax, ymax), tuple(grown))


def point_in_polygon(p, poly) -> bool:
    """True for points inside or on the boundary of a convex CCW polygon."""
    n = len(poly)
    for i in range(n):
        if _cross(poly[i], poly[(i + 1) % n], p) < -EPS:
            return False
    return True


def _separated(a, b, poly) -> bool:
    axes = []
    n = len(poly)
    for i in range(n):
        e = poly[(i + 1) % n] - poly[i]
        axes.append((e[1], -e[0]))
    d = (b[0] - a[0], b[1] - a[1])
    if d != (0.0, 0.0):
        axes.append((-d[1], d[0]))
    for ax in axes:
        proj = poly @ np.asarray(ax)
        pa = a[0] * ax[0] + a[1] * ax[1]
        pb = b[0] * ax[0] + b[1] * ax[1]
        scale = EPS * (1.0 + abs(pa) + abs(pb) + float(np.abs(proj).max()))
        if max(pa, pb) < proj.min() - scale or min(pa, pb) > proj.max() + scale:
            return True
    return False


def segment_collides(a, b, world: World2D) -> bool:
    """True iff segment ``ab`` touches any obstacle (interior or boundary)."""
    a = (float(a[0]), float(a[1]))
    b = (float(b[0]), float(b[1]))
    return any(not _separated(a, b, poly) for poly in world.obstacles)


def sample_free(
    world: World2D, n: int, rng_seed: int, max_attempts: Optional[int] = None, bounds=None
) -> np.ndarray:
    """``n`` uniform rejection samples from the free space, shape ``(n, 2)``.

    ``bounds`` overrides the sampling rectangle (defaults to the world's).
    """
    if n < 1:
        raise ValueError("need at least one sample")
    budget = 1000 * n if max_attempts is None else max_attempts
    rng = np.random.default_rng(rng_seed)
    xmin, ymin, xmax, ymax = world.bounds if bounds is None else bounds
    out = []
    attempts = 0
    while len(out) < n:
        if attempts >= budget:
            raise PlanningError(f"free-space sampling exhausted {budget} attempts with {len(out)}/{n} samples")
        attempts += 1
        p = (xmin + (xmax - xmin) * rng.random(), ymin + (ymax - ymin) * rng.random())
        if not any(point_in_polygon(p, poly) for poly in world.obstacles):
            out.append(p)
    return np.array(out)


@dataclass
class Roadmap:
    vertices: np.ndarray
    edges: List[dict] = field(default_factory=list)  # edges[i] = {j: weight}

    def neighbours(self, i: int) -> dict:
        return self.edges[i]

    def index_of(self, q) -> int:
        hits = np.flatnonzero((self.vertices[:, 0] == q[0]) & (self.vertices[:, 1] == q[1]))
        if hits.size == 0:
            raise KeyError(f"{tuple(q)} is not a roadmap vertex")
        return int(hits[0])


def build_roadmap(world: World2D, samples, c: int, q_init, q_goal) -> Roadmap:
    """Link every vertex to those of its ``c`` nearest neighbours it can see."""
    if c < 1:
        raise ValueError("neighbour count must be >= 1")
    for q in (q_init, q_goal):
        if not world.is_free(q):
            raise PlanningError(f"endpoint {tuple(q)} is not collision-free")
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    verts = np.vstack([samples, np.asarray(q_init, float)[None], np.asarray(q_goal, float)[None]])
    n = len(verts)
    edges: List[dict] = [dict() for _ in range(n)]
    diff = verts[:, None, :] - verts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")
        order = order[order != i][:c]
        for j in order:
            j = int(j)
            if j in edges[i]:
                continue
            if not segment_collides(verts[i], verts[j], world):
                w = float(dist[i, j])
                edges[i][j] = w
                edges[j][i] = w
    return Roadmap(verts, edges)


def shortest_path_indices(roadmap: Roadmap, src: int, dst: int) -> Tuple[List[int], float]:
    """Dijkstra; equal-cost ties go to the lexicographically smallest index sequence."""
    best = {src: (0.0, (src,))}
    heap = [(0.0, (src,))]
    done = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return list(path), d
        for v, w in roadmap.edges[u].items():
            if v in done:
                continue
            cand = (d + w, path + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    raise NoPathError(f"no roadmap path between vertices {src} and {dst}")


def shortest_path(roadmap: Roadmap, q_init, q_goal) -> np.ndarray:
    i, j = roadmap.index_of(q_init), roadmap.index_of(q_goal)
    if np.array_equal(roadmap.vertices[i], roadmap.vertices[j]):
        return roadmap.vertices[[i]].copy()
    idx, _ = shortest_path_indices(roadmap, i, j)
    return roadmap.vertices[idx].copy()


def path_length(path) -> float:
    path = np.asarray(path, dtype=float)
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def _resample(path: np.ndarray, n: int):
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0])
    path = path[keep]
    seg = seg[seg > 0]
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], n)
    pts = np.column_stack([np.interp(s, cum, path[:, 0]), np.interp(s, cum, path[:, 1])])
    units = np.diff(path, axis=0) / seg[:, None]
    tangents = np.empty((n, 2))
    for k, sk in enumerate(s):
        i = int(np.clip(np.searchsorted(cum, sk, side="right") - 1, 0, len(seg) - 1))
        t = units[i]
        at_vertex = [m for m in range(1, len(cum) - 1) if abs(cum[m] - sk) <= 1e-12 * (1 + cum[-1])]
        if at_vertex:
            m = at_vertex[0]
            t = units[m - 1] + units[m]
            if np.linalg.norm(t) <= EPS:
                t = units[m]
        tangents[k] = t / np.linalg.norm(t)
    return pts, tangents


def path_to_trajectories(
    path, load_length: float, carry_height: float, n_d: int, world: Optional[World2D] = None
) -> Tuple[Trajectory3D, Trajectory3D]:
    """Offset a load-midpoint path by +-l/2 along its left normal.

    Returns ``(T_L, T_F)``; the leader trajectory is on the left of travel.
    """
    path = np.asarray(path, dtype=float).reshape(-1, 2)
    if len(path) < 2 or path_length(path) <= 0:
        raise ValueError("path needs at least two distinct points")
    if n_d < 2:
        raise ValueError("n_d must be >= 2")
    pts, tan = _resample(path, n_d)
    normal = np.column_stack([-tan[:, 1], tan[:, 0]])
    h = 0.5 * load_length
    z = np.full((n_d, 1), float(carry_height))
    left = pts + h * normal
    right = pts - h * normal
    if world is not None:
        for name, side in (("leader/left", left), ("follower/right", right)):
            for a, b in zip(side[:-1], side[1:]):
                if segment_collides(a, b, world):
                    raise PlanningError(f"{name} offset trajectory collides near ({a[0]:.3f}, {a[1]:.3f})")
    return Trajectory3D(np.hstack([left, z])), Trajectory3D(np.hstack([right, z]))


def plan_path(
    world: World2D,
    q_init,
    q_goal,
    n_samples: int = 200,
    c: int = 10,
    seed: int = 0,
    robot_radius: float = 0.22,
) -> Tuple[np.ndarray, Roadmap]:
    """Full PRM query on the obstacle set inflated by ``robot_radius``."""
    planning_world = world.inflated(robot_radius)
    samples = sample_free(planning_world, n_samples, seed, bounds=world.bounds)
    roadmap = build_roadmap(planning_world, samples, c, q_init, q_goal)
    path = shortest_path(roadmap, q_init, q_goal)
    for a, b in zip(path[:-1], path[1:]):
        if segment_collides(a, b, world):  # pragma: no cover - guarded by construction
            raise PlanningError("planned path collides with an obstacle")
    return path, roadmap


def parse_world(text: str) -> World2D:
    """Parse the plain-text world format.

    ::

        cotransport-world 1
        bounds <xmin> <ymin> <xmax> <ymax>
        obstacle <x1> <y1> <x2> <y2> <x3> <y3> [...]

    Blank lines and ``#`` comments are ignored; ``obstacle`` may repeat.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != WORLD_HEADER:
        raise ValueError(f"world file must start with '{WORLD_HEADER}'")
    bounds = None
    obstacles = []
    for ln in lines[1:]:
        key, *vals = ln.split()
        try:
            nums = [float(v) for v in vals]
        except ValueError as exc:
            raise ValueError(f"bad number in line '{ln}'") from exc
        if key == "bounds":
            if len(nums) != 4:
                raise ValueError("bounds needs 4 numbers")
            bounds = tuple(nums)
        elif key == "obstacle":
            if len(nums) < 6 or len(nums) % 2:
                raise ValueError("obstacle needs >= 3 x/y vertex pairs")
            obstacles.append(np.array(nums).reshape(-1, 2))
        else:
            raise ValueError(f"unknown world key '{key}'")
    if bounds is None:
        raise ValueError("world file has no bounds line")
    return World2D(bounds, tuple(obstacles))


def format_world(world: World2D) -> str:
    out = [WORLD_HEADER, "bounds " + " ".join(repr(v) for v in world.bounds)]
    for poly in world.obstacles:
        out.append("obstacle " + " ".join(repr(float(v)) for v in poly.ravel()))
    return "\n".join(out) + "\n"


def load_world(path) -> World2D:
    return parse_world(Path(path).read_text())
