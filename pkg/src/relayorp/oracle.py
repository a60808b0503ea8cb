"""Brute-force references used to validate the placement and allocation code.

Nothing here calls ``channel.allocate`` or ``placement``; the only shared
piece is the topology/hypergraph description.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .channel import Hypergraph, RelayPath, Topology, build_hypergraph
from .errors import TopologyError
from .geometry import ConvexPolygon, Point2, contains_many

MAX_PARTITION_N = 12
NODE_NUDGE = 1e-6


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 101
    boundary: bool = True

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be at least 2")


def _segment_samples(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    m = max(int(math.ceil(np.linalg.norm(b - a) / h)), 1)
    u = np.linspace(0.0, 1.0, m + 1)[:, None]
    return a + u * (b - a)


def grid_spacing(hull: ConvexPolygon, grid: GridSpec) -> float:
    v = hull.as_array()
    if hull.is_degenerate:
        a, b = _segment_ends(v)
        return float(np.linalg.norm(b - a)) / (grid.resolution - 1)
    xmin, ymin, xmax, ymax = hull.bounds()
    return max(xmax - xmin, ymax - ymin) / (grid.resolution - 1)


def _segment_ends(v: np.ndarray):
    if len(v) == 1:
        return v[0], v[0]
    d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    a, b = v[i], v[j]
    return (a, b) if tuple(a) <= tuple(b) else (b, a)


def grid_points(topo: Topology, grid: GridSpec) -> np.ndarray:
    """Candidate relay positions: the hull-clipped lattice plus boundary
    samples; a collinear hull degrades to sampling the segment. Points
    landing on a node are pulled a hair toward the hull centroid so the rate
    stays finite."""
    hull = topo.hull
    v = hull.as_array()
    if hull.is_degenerate:
        a, b = _segment_ends(v)
        pts = a + np.linspace(0.0, 1.0, grid.resolution)[:, None] * (b - a)
    else:
        xmin, ymin, xmax, ymax = hull.bounds()
        xs = np.linspace(xmin, xmax, grid.resolution)
        ys = np.linspace(ymin, ymax, grid.resolution)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        pts = pts[contains_many(hull, pts)]
        if grid.boundary:
            h = grid_spacing(hull, grid)
            ring = [_segment_samples(v[i], v[(i + 1) % len(v)], h) for i in range(len(v))]
            pts = np.vstack([pts, *ring])
    nodes = topo.node_array()
    scale = max(hull.diameter, 1.0)
    c = np.asarray(hull.centroid)
    d = np.min(np.linalg.norm(pts[:, None, :] - nodes[None, :, :], axis=2), axis=1)
    close = d < NODE_NUDGE * scale
    if np.any(close):
        off = c - pts[close]
        norm = np.linalg.norm(off, axis=1, keepdims=True)
        pts[close] += NODE_NUDGE * scale * off / np.where(norm > 0, norm, 1.0)
    return pts


def grid_rates(topo: Topology, pts: np.ndarray) -> np.ndarray:
    """Exact rate at many points via the two-budget path LP in closed form:
    one path alone, or a pair of paths plus the direct hyperarc."""
    s = np.asarray(topo.source, dtype=float)
    T = topo.positions
    g_pow = topo.gamma * topo.p_s
    k_s = topo.p_s / topo.n0
    k_r = g_pow / topo.n0
    alpha = topo.alpha
    c = k_s * topo.d_stn ** -alpha
    dsr = np.linalg.norm(pts - s, axis=1)
    dst = topo.source_dists
    drt = np.linalg.norm(pts[:, None, :] - T[None, :, :], axis=2)
    n = topo.n
    # path k: receivers T[:k] reached by the source arc, T[k:] via the relay
    rs = np.empty((len(pts), n))
    rr = np.empty((len(pts), n))
    for k in range(n):
        rs[:, k] = np.maximum(dsr, dst[k - 1]) if k > 0 else dsr
        rr[:, k] = drt[:, k:].max(axis=1)
    a = k_s * rs ** -alpha
    b = k_r * rr ** -alpha
    best = np.full(len(pts), c)
    single = np.where(b >= a, a, b + c * (1.0 - b / a))
    best = np.maximum(best, single.max(axis=1))
    for i in range(n):
        for j in range(i + 1, n):
            ai, aj, bi, bj = a[:, i], a[:, j], b[:, i], b[:, j]
            det = 1.0 / (ai * bj) - 1.0 / (aj * bi)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = (1.0 / bj - 1.0 / aj) / det
                xj = (1.0 / ai - 1.0 / bi) / det
                pair = xi + xj
            ok = (xi > 0) & (xj > 0) & np.isfinite(pair)
            best = np.where(ok, np.maximum(best, pair), best)
    return best


def grid_best_relay(topo: Topology, grid: GridSpec | int = 401) -> tuple[Point2, float]:
    if isinstance(grid, int):
        grid = GridSpec(grid)
    pts = grid_points(topo, grid)
    rates = grid_rates(topo, pts)
    top = rates.max()
    tied = np.flatnonzero(rates >= top - 1e-12 * max(top, 1.0))
    i = tied[np.lexsort((pts[tied, 1], pts[tied, 0]))[0]]
    return Point2(float(pts[i, 0]), float(pts[i, 1])), float(rates[i])


def discretization_bound(topo: Topology, grid: GridSpec | int, grid_rate: float) -> float:
    """Upper bound on (true optimum - best grid rate).

    The rate gradient norm is at most alpha * m * R^(1 + 1/alpha) in units
    where P_s / N0 = 1, with m = max(1, gamma^(-1/alpha)). Every hull point
    is within d = h (sqrt 2 + 1/2) of a sample, so the optimum R* satisfies
    R* <= R_grid + alpha m R*^(1+1/alpha) d; the smallest such R* is found
    by fixed-point iteration, falling back to a global rate cap.
    """
    if isinstance(grid, int):
        grid = GridSpec(grid)
    h = grid_spacing(topo.hull, grid)
    scale = max(topo.hull.diameter, 1.0)
    if topo.hull.is_degenerate:
        d = h / 2.0
    elif grid.boundary:
        d = h * (math.sqrt(2.0) + 0.5)
    else:
        d = scale  # no boundary samples: nothing useful to say
    d += NODE_NUDGE * scale
    unit = topo.p_s / topo.n0
    alpha = topo.alpha
    m = max(1.0, topo.gamma ** (-1.0 / alpha))
    g = topo.bias
    cap = topo.d_stn ** -alpha * (1.0 + (1.0 + g) ** alpha)
    r_grid = grid_rate / unit
    x = r_grid
    for _ in range(500):
        nxt = r_grid + alpha * m * x ** (1.0 + 1.0 / alpha) * d
        if nxt > cap:
            x = cap
            break
        if abs(nxt - x) <= 1e-15 * max(nxt, 1.0):
            x = nxt
            break
        x = nxt
    else:
        x = cap
    return unit * max(x - r_grid, 0.0)


def lambda_sweep(topo: Topology, relay, steps: int = 1001) -> tuple[float, float]:
    """Best rate over a uniform lambda grid and all single relay paths:
    lambda of the source power feeds the relay path, the rest the direct
    hyperarc. Returns (lambda, rate)."""
    r = np.asarray(relay, dtype=float)
    s = np.asarray(topo.source, dtype=float)
    d_sr = float(np.linalg.norm(r - s))
    if d_sr == 0.0:
        raise TopologyError("coincident nodes: relay on source")
    alpha = topo.alpha
    c = topo.p_s / (topo.d_stn ** alpha * topo.n0)
    d_st = [float(np.linalg.norm(np.asarray(t.pos) - s)) for t in topo.receivers]
    d_rt = [float(np.linalg.norm(np.asarray(t.pos) - r)) for t in topo.receivers]
    lam = np.linspace(0.0, 1.0, steps)
    best_rate, best_lam = c, 0.0
    for rho_s in sorted({d_sr} | {x for x in d_st if x >= d_sr}):
        far = [drt for dst, drt in zip(d_st, d_rt) if dst > rho_s]
        a = topo.p_s / (rho_s ** alpha * topo.n0)
        b = math.inf if not far else topo.p_r / (max(far) ** alpha * topo.n0)
        vals = np.minimum(lam * a, b) + (1.0 - lam) * c
        i = int(np.argmax(vals))
        if vals[i] > best_rate + 1e-15:
            best_rate, best_lam = float(vals[i]), float(lam[i])
    return best_lam, best_rate


def enumerate_partitions(topo: Topology, relay) -> RelayPath:
    """Max-min-cut relay path over all 2^n splits of T into (T1, T2)."""
    n = topo.n
    if n > MAX_PARTITION_N:
        raise TopologyError(f"partition space too large for n={n} (limit {MAX_PARTITION_N})")
    r = np.asarray(relay, dtype=float)
    s = np.asarray(topo.source, dtype=float)
    d_sr = float(np.linalg.norm(r - s))
    d_st = [float(np.linalg.norm(np.asarray(t.pos) - s)) for t in topo.receivers]
    d_rt = [float(np.linalg.norm(np.asarray(t.pos) - r)) for t in topo.receivers]
    alpha = topo.alpha
    best = None
    for mask in itertools.product((True, False), repeat=n):
        t1 = [i for i in range(n) if mask[i]]
        t2 = [i for i in range(n) if not mask[i]]
        rho_s = max([d_sr] + [d_st[i] for i in t1])
        rho_r = max((d_rt[i] for i in t2), default=0.0)
        cut_s = topo.p_s / (rho_s ** alpha * topo.n0)
        cut_r = math.inf if rho_r == 0.0 else topo.p_r / (rho_r ** alpha * topo.n0)
        mc = min(cut_s, cut_r)
        key = (mc, -rho_s)
        if best is None or key > best[0]:
            ids1 = frozenset(topo.receivers[i].id for i in t1)
            ids2 = frozenset(topo.receivers[i].id for i in t2)
            best = (key, RelayPath(ids1, ids2, rho_s, rho_r, mc))
    return best[1]


def _cut_rows(hg: Hypergraph, ids: list[str]):
    """Two cuts per receiver t: {r, t} on the sink side, then {t} alone."""
    rows = []
    for t in ids:
        rows.append([1.0 if (a.tail == "s" and ({"r", t} & set(a.heads))) else 0.0 for a in hg.arcs])
        rows.append([1.0 if t in a.heads else 0.0 for a in hg.arcs])
    return np.array(rows)


def hyperarc_lp(topo: Topology, relay) -> tuple[float, np.ndarray]:
    """Maximise z subject to every receiver cut carrying z, with per-node
    power budgets. Variables are hyperarc powers. Returns (rate, powers)."""
    hg = build_hypergraph(topo, relay)
    arcs = hg.arcs
    m = len(arcs)
    cap = np.array([a.rate_per_watt for a in arcs])
    rows = _cut_rows(hg, [t.id for t in topo.receivers])
    # variables: powers (m), z
    A_cut = np.hstack([-(rows * cap), np.ones((len(rows), 1))])
    budget_s = np.r_[[1.0 if a.tail == "s" else 0.0 for a in arcs], 0.0]
    budget_r = np.r_[[1.0 if a.tail == "r" else 0.0 for a in arcs], 0.0]
    A = np.vstack([A_cut, budget_s, budget_r])
    b = np.r_[np.zeros(len(rows)), topo.p_s, topo.p_r]
    cost = np.r_[np.zeros(m), -1.0]
    res = linprog(cost, A_ub=A, b_ub=b, bounds=[(0, None)] * (m + 1), method="highs")
    if res.status != 0:
        raise RuntimeError(f"hyperarc LP failed: {res.message}")
    return float(res.x[-1]), res.x[:m]


def cut_rate(topo: Topology, hg: Hypergraph, powers) -> float:
    """Network-coded multicast rate of a given power vector over ``hg``."""
    cap = np.array([a.rate_per_watt for a in hg.arcs]) * np.asarray(powers, dtype=float)
    rows = _cut_rows(hg, [t.id for t in topo.receivers])
    return float(np.min(rows @ cap))


def random_allocations(topo: Topology, relay, count: int, rng: np.random.Generator) -> float:
    """Largest rate among ``count`` random feasible power vectors."""
    hg = build_hypergraph(topo, relay)
    tails = np.array([a.tail for a in hg.arcs])
    src = np.flatnonzero(tails == "s")
    rel = np.flatnonzero(tails == "r")
    cap = np.array([a.rate_per_watt for a in hg.arcs])
    rows = _cut_rows(hg, [t.id for t in topo.receivers])
    powers = np.zeros((count, len(hg.arcs)))
    # an extra Dirichlet slot lets budgets go partly unused
    powers[:, src] = rng.dirichlet(np.ones(len(src) + 1), size=count)[:, :-1] * topo.p_s
    powers[:, rel] = rng.dirichlet(np.ones(len(rel) + 1), size=count)[:, :-1] * topo.p_r
    rates = np.min((powers * cap) @ rows.T, axis=1)
    return float(rates.max())
