"""Planar primitives: hulls, containment, projection, enclosing circles and
the constrained weighted minimax point used to place the relay."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import GeometryError

CONTAIN_TOL = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


def as_point(p) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate: ({x}, {y})")
    return Point2(x, y)


def dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class ConvexPolygon:
    """Counter-clockwise convex polygon. One or two vertices encode a point or
    a segment."""

    vertices: tuple[Point2, ...]

    def __post_init__(self):
        if not self.vertices:
            raise GeometryError("polygon needs at least one vertex")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @property
    def centroid(self) -> Point2:
        v = self.as_array()
        return Point2(*v.mean(axis=0))

    @property
    def area(self) -> float:
        if self.is_degenerate:
            return 0.0
        v = self.as_array()
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def diameter(self) -> float:
        v = self.as_array()
        return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)))

    def bounds(self) -> tuple[float, float, float, float]:
        v = self.as_array()
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    def edges(self) -> list[tuple[Point2, Point2]]:
        v = self.vertices
        if len(v) == 1:
            return []
        if len(v) == 2:
            return [(v[0], v[1])]
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


MERGE_EPS = 1e-12


def _merge_close(pts: list[Point2]) -> list[Point2]:
    """Drop points within MERGE_EPS (relative to the coordinate scale) of an
    earlier one; near-duplicates otherwise give zero-length hull edges."""
    arr = np.array(pts, dtype=float)
    eps = MERGE_EPS * max(float(np.abs(arr).max()), 1.0)
    keep = []
    for i, p in enumerate(arr):
        if all(np.hypot(*(p - arr[j])) > eps for j in keep):
            keep.append(i)
    return [pts[i] for i in keep]


def convex_hull(points: Sequence) -> ConvexPolygon:
    """Andrew's monotone chain; collinear and (near-)duplicate points are dropped."""
    pts = sorted({as_point(p) for p in points})
    if not pts:
        raise GeometryError("empty point set")
    pts = _merge_close(pts)
    if len(pts) <= 2:
        return ConvexPolygon(tuple(pts))

    lower: list[Point2] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point2] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return ConvexPolygon(tuple(hull))


def _closest_on_segment(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Closest points on segment a-b to each row of p."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.broadcast_to(a, p.shape).copy()
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return a + t[:, None] * ab


def contains_many(poly: ConvexPolygon, pts: np.ndarray, tol: float = CONTAIN_TOL) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    v = poly.as_array()
    if len(v) < 3:
        near = project_many(poly, pts)
        return np.linalg.norm(near - pts, axis=1) <= tol
    a = v
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    # signed distance to each edge line, positive inside for ccw order
    rel = pts[:, None, :] - a[None, :, :]
    signed = (e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]) / lengths[None, :]
    return np.all(signed >= -tol, axis=1)


def contains(poly: ConvexPolygon, p, tol: float = CONTAIN_TOL) -> bool:
    return bool(contains_many(poly, np.array([as_point(p)]), tol)[0])


def project_many(poly: ConvexPolygon, pts: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``pts`` onto the polygon."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    v = poly.as_array()
    if len(v) == 1:
        return np.broadcast_to(v[0], pts.shape).copy()
    if len(v) == 2:
        return _closest_on_segment(v[0], v[1], pts)
    out = pts.copy()
    inside = contains_many(poly, pts, tol=0.0)
    if inside.all():
        return out
    outside = pts[~inside]
    best = None
    best_d = None
    for i in range(len(v)):
        q = _closest_on_segment(v[i], v[(i + 1) % len(v)], outside)
        d = np.linalg.norm(q - outside, axis=1)
        if best is None:
            best, best_d = q, d
        else:
            closer = d < best_d
            best[closer] = q[closer]
            best_d = np.where(closer, d, best_d)
    out[~inside] = best
    return out


def project_to(poly: ConvexPolygon, p) -> Point2:
    p = as_point(p)
    if contains(poly, p, tol=0.0):
        return p
    q = project_many(poly, np.array([p]))[0]
    return Point2(float(q[0]), float(q[1]))


# -- smallest enclosing circle ------------------------------------------------

def _circle_two(p, q) -> tuple[float, float, float]:
    cx, cy = (p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0
    return cx, cy, max(dist((cx, cy), p), dist((cx, cy), q))


def _circumcircle(a, b, c) -> tuple[float, float, float] | None:
    # translate to reduce cancellation
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return x, y, max(dist((x, y), a), dist((x, y), b), dist((x, y), c))


def _in_circle(c, p, eps: float = 1e-14) -> bool:
    return c is not None and dist((c[0], c[1]), p) <= c[2] * (1.0 + eps) + 1e-15


def _circle_with_two(points, p, q):
    circ = _circle_two(p, q)
    left = right = None
    for r in points:
        if _in_circle(circ, r):
            continue
        cross = _cross(p, q, r)
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        side = _cross(p, q, (c[0], c[1]))
        if cross > 0.0 and (left is None or _cross(p, q, (left[0], left[1])) < side):
            left = c
        elif cross < 0.0 and (right is None or _cross(p, q, (right[0], right[1])) > side):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _circle_with_one(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _in_circle(c, q):
            if c[2] == 0.0:
                c = _circle_two(p, q)
            else:
                c = _circle_with_two(points[: i + 1], p, q)
    return c


def smallest_enclosing_circle(points: Sequence, seed: int = 0) -> tuple[Point2, float]:
    """Exact minimal enclosing circle by randomized incremental construction
    (expected linear time). The shuffle is seeded so results are reproducible."""
    pts = [as_point(p) for p in points]
    if not pts:
        raise GeometryError("empty point set")
    random.Random(seed).shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _in_circle(c, p):
            c = _circle_with_one(pts[: i + 1], p)
    return Point2(c[0], c[1]), c[2]


# -- weighted minimax point ----------------------------------------------------

@dataclass(frozen=True)
class MinimaxResult:
    """``active_set`` indexes the combined list ``[anchor, *targets]``."""

    point: Point2
    value: float
    active_set: tuple[int, ...]


def _weighted_max(x: np.ndarray, centers: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Objective for each row of x (shape (m, 2))."""
    d = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)
    return np.max(d * weights[None, :], axis=1)


def _segment_search(a: np.ndarray, b: np.ndarray, centers, weights, iters: int = 200):
    """Golden-section search of the convex objective along segment a-b."""
    def f(u):
        return float(_weighted_max((a + u * (b - a))[None, :], centers, weights)[0])

    lo, hi = 0.0, 1.0
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if hi - lo < 1e-15:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = f(x2)
    cands = [0.0, 1.0, lo, hi, (lo + hi) / 2.0]
    u = min(cands, key=f)
    return a + u * (b - a)


def _start_points(poly: ConvexPolygon, count: int, rng: np.random.Generator) -> np.ndarray:
    v = poly.as_array()
    centroid = v.mean(axis=0)
    if len(v) >= count:
        idx = np.linspace(0, len(v), count - 1, endpoint=False).astype(int)
        starts = list(v[idx])
    else:
        starts = list(v)
        while len(starts) < count - 1:
            w = rng.dirichlet(np.ones(len(v)))
            starts.append(w @ v)
    starts.append(centroid)
    return np.array(starts)


def _subgradient(poly, centers, weights, tol, rng, n_starts=8, max_iter=4000, window=50):
    """Projected subgradient descent, all starts advanced together."""
    x = _start_points(poly, n_starts, rng)
    step0 = 0.25 * max(poly.diameter, 1e-12)
    fx = _weighted_max(x, centers, weights)
    best_x, best_f = x.copy(), fx.copy()
    history = [float(best_f.min())]
    for k in range(1, max_iter + 1):
        diff = x[:, None, :] - centers[None, :, :]
        d = np.linalg.norm(diff, axis=2)
        i = np.argmax(d * weights[None, :], axis=1)
        rows = np.arange(len(x))
        di = d[rows, i]
        g = np.where(di[:, None] > 0, diff[rows, i] / np.where(di > 0, di, 1.0)[:, None], 0.0)
        x = project_many(poly, x - (step0 / math.sqrt(k)) * g)
        fx = _weighted_max(x, centers, weights)
        better = fx < best_f
        best_x[better], best_f[better] = x[better], fx[better]
        history.append(float(best_f.min()))
        if k >= window and history[-window - 1] - history[-1] < tol / 10.0:
            break
    j = int(np.argmin(best_f))
    return best_x[j], float(best_f[j])


def polish_minimax(poly: ConvexPolygon, centers: np.ndarray, weights: np.ndarray, x0) -> np.ndarray:
    """Local refinement on the smooth squared epigraph form:
    min t  s.t.  t >= w_i^2 |x - p_i|^2, x in poly.  Convex, so any start works."""
    x0 = np.asarray(x0, dtype=float)
    w2 = weights ** 2
    t0 = float(np.max(w2 * np.sum((centers - x0) ** 2, axis=1)))
    cons = [{
        "type": "ineq",
        "fun": lambda z: z[2] - w2 * np.sum((centers - z[:2]) ** 2, axis=1),
        "jac": lambda z: np.column_stack([2.0 * w2[:, None] * (centers - z[:2]), np.ones(len(centers))]),
    }]
    v = poly.as_array()
    if len(v) >= 3:
        e = np.roll(v, -1, axis=0) - v
        # cross(e_i, x - v_i) >= 0 for every ccw edge
        A = np.column_stack([-e[:, 1], e[:, 0], np.zeros(len(v))])
        b = e[:, 1] * v[:, 0] - e[:, 0] * v[:, 1]
        cons.append({"type": "ineq", "fun": lambda z: A @ z + b, "jac": lambda z: A})
    res = minimize(
        lambda z: z[2],
        np.r_[x0, t0],
        jac=lambda z: np.array([0.0, 0.0, 1.0]),
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 300},
    )
    return project_many(poly, res.x[:2][None, :])[0]


def minimax_point(
    anchor,
    anchor_weight: float,
    targets: Sequence,
    constraint: ConvexPolygon,
    tol: float = 1e-6,
    seed: int = 0,
) -> MinimaxResult:
    """Point of ``constraint`` minimising
    ``max(anchor_weight * |x - anchor|, max_j |x - targets[j]|)``.

    Projected subgradient descent from eight starts locates the basin; an
    SLSQP pass on the squared epigraph then pins the optimum well below ``tol``.
    Point and segment constraints are searched directly.
    """
    if not anchor_weight > 0 or not math.isfinite(anchor_weight):
        raise GeometryError(f"anchor weight must be positive, got {anchor_weight}")
    if not tol > 0:
        raise GeometryError(f"tolerance must be positive, got {tol}")
    anchor = as_point(anchor)
    centers = np.array([anchor] + [as_point(t) for t in targets], dtype=float)
    weights = np.r_[anchor_weight, np.ones(len(centers) - 1)]
    v = constraint.as_array()

    if len(centers) == 1:
        x = np.array(project_to(constraint, anchor))
    elif len(v) == 1:
        x = v[0].copy()
    elif len(v) == 2:
        x = _segment_search(v[0], v[1], centers, weights)
    else:
        rng = np.random.default_rng(seed)
        x, fx = _subgradient(constraint, centers, weights, tol, rng)
        polished = polish_minimax(constraint, centers, weights, x)
        if _weighted_max(polished[None, :], centers, weights)[0] <= fx:
            x = polished

    value = float(_weighted_max(x[None, :], centers, weights)[0])
    contrib = weights * np.linalg.norm(centers - x, axis=1)
    active = tuple(int(i) for i in np.flatnonzero(contrib >= value - 10.0 * tol))
    return MinimaxResult(Point2(float(x[0]), float(x[1])), value, active)
