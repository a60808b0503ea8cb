"""Low-SNR broadcast relay channel on the achievable hypergraph.

Rates are wideband: a hyperarc carrying power P to heads at most D away
delivers P / (D**alpha * N0) nats/sec. For a fixed relay position the
multicast rate is a two-budget linear program over paths; see ``allocate``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import CoincidentNodesError, TopologyError
from .geometry import ConvexPolygon, Point2, as_point, convex_hull, dist

SOURCE_ID = "s"
RELAY_ID = "r"
COVER_TOL = 1e-9
_TIE = 1e-12


class Receiver(NamedTuple):
    id: str
    pos: Point2


@dataclass(frozen=True)
class Topology:
    """Immutable problem instance. Receivers are kept sorted by increasing
    distance from the source (ties by input order)."""

    source: Point2
    receivers: tuple[Receiver, ...]
    p_s: float = 1.0
    gamma: float = 1.0
    alpha: float = 2.0
    n0: float = 1.0

    def __post_init__(self):
        src = as_point(self.source)
        recs = []
        for item in self.receivers:
            rid, pos = (item.id, item.pos) if isinstance(item, Receiver) else item
            recs.append(Receiver(str(rid), as_point(pos)))
        if not recs:
            raise TopologyError("at least one receiver is required")
        ids = [r.id for r in recs]
        if len(set(ids)) != len(ids):
            raise TopologyError("receiver ids must be unique")
        if SOURCE_ID in ids or RELAY_ID in ids:
            raise TopologyError(f"receiver ids {SOURCE_ID!r} and {RELAY_ID!r} are reserved")
        for name, val in (("p_s", self.p_s), ("gamma", self.gamma), ("n0", self.n0)):
            if not (math.isfinite(val) and val > 0):
                raise TopologyError(f"{name} must be positive and finite, got {val}")
        if not (math.isfinite(self.alpha) and self.alpha >= 2):
            raise TopologyError(f"alpha must be >= 2, got {self.alpha}")
        for r in recs:
            if dist(r.pos, src) == 0.0:
                raise CoincidentNodesError(f"coincident nodes: receiver {r.id} sits on the source")
        recs.sort(key=lambda r: dist(r.pos, src))
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "receivers", tuple(recs))
        for name in ("p_s", "gamma", "alpha", "n0"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n(self) -> int:
        return len(self.receivers)

    @property
    def p_r(self) -> float:
        return self.gamma * self.p_s

    @property
    def bias(self) -> float:
        """alpha-th root of gamma: the weight on source-side distances."""
        return self.gamma ** (1.0 / self.alpha)

    @property
    def farthest(self) -> Receiver:
        return self.receivers[-1]

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([r.pos for r in self.receivers], dtype=float)

    @cached_property
    def source_dists(self) -> np.ndarray:
        return np.linalg.norm(self.positions - np.asarray(self.source), axis=1)

    @property
    def d_stn(self) -> float:
        return float(self.source_dists[-1])

    @cached_property
    def hull(self) -> ConvexPolygon:
        return convex_hull([self.source] + [r.pos for r in self.receivers])

    def node_array(self) -> np.ndarray:
        return np.vstack([np.asarray(self.source)[None, :], self.positions])

    def scaled(self, k: float) -> "Topology":
        """Same instance with every coordinate multiplied by ``k``."""
        s = self.source
        return Topology(
            Point2(s.x * k, s.y * k),
            tuple(Receiver(r.id, Point2(r.pos.x * k, r.pos.y * k)) for r in self.receivers),
            self.p_s, self.gamma, self.alpha, self.n0,
        )


def hyperarc_rate(P: float, D: float, alpha: float, N0: float) -> float:
    if P < 0:
        raise ValueError(f"power must be non-negative, got {P}")
    if D <= 0:
        raise CoincidentNodesError("coincident nodes")
    return P / (D ** alpha * N0)


@dataclass(frozen=True)
class Hyperarc:
    tail: str
    heads: frozenset[str]
    radius: float
    rate_per_watt: float


@dataclass(frozen=True)
class Hypergraph:
    relay: Point2
    arcs: tuple[Hyperarc, ...]

    @property
    def source_arcs(self) -> tuple[Hyperarc, ...]:
        return tuple(a for a in self.arcs if a.tail == SOURCE_ID)

    @property
    def relay_arcs(self) -> tuple[Hyperarc, ...]:
        return tuple(a for a in self.arcs if a.tail == RELAY_ID)


def _check_relay(topo: Topology, relay) -> Point2:
    r = as_point(relay)
    if dist(r, topo.source) == 0.0:
        raise CoincidentNodesError("coincident nodes: relay sits on the source")
    for rec in topo.receivers:
        if dist(r, rec.pos) == 0.0:
            raise CoincidentNodesError(f"coincident nodes: relay sits on receiver {rec.id}")
    return r


def build_hypergraph(topo: Topology, relay) -> Hypergraph:
    """The n+1 source hyperarcs reach distance-ordered prefixes of {r} + T,
    the n relay hyperarcs reach distance-ordered prefixes of T."""
    r = _check_relay(topo, relay)
    arcs = []
    from_s = sorted(
        [(dist(topo.source, r), RELAY_ID)] + [(d, rec.id) for d, rec in zip(topo.source_dists, topo.receivers)],
        key=lambda item: item[0],
    )
    for i in range(len(from_s)):
        radius = float(from_s[i][0])
        heads = frozenset(node for _, node in from_s[: i + 1])
        arcs.append(Hyperarc(SOURCE_ID, heads, radius, hyperarc_rate(1.0, radius, topo.alpha, topo.n0)))
    from_r = sorted(((dist(r, rec.pos), rec.id) for rec in topo.receivers), key=lambda item: item[0])
    for i in range(len(from_r)):
        radius = float(from_r[i][0])
        heads = frozenset(node for _, node in from_r[: i + 1])
        arcs.append(Hyperarc(RELAY_ID, heads, radius, hyperarc_rate(1.0, radius, topo.alpha, topo.n0)))
    return Hypergraph(r, tuple(arcs))


@dataclass(frozen=True)
class RelayPath:
    """Path {(s, T1 + r), (r, T2)}. ``rho_r`` is 0 when T2 is empty."""

    t1: frozenset[str]
    t2: frozenset[str]
    rho_s: float
    rho_r: float
    mincut_full_power: float

    def source_rate(self, topo: Topology) -> float:
        return topo.p_s / (self.rho_s ** topo.alpha * topo.n0)

    def relay_rate(self, topo: Topology) -> float:
        if self.rho_r == 0.0:
            return math.inf
        return topo.p_r / (self.rho_r ** topo.alpha * topo.n0)


def relay_paths(topo: Topology, relay) -> list[RelayPath]:
    """Distance-threshold candidates, ordered by increasing source radius.
    Any hyperarc covers a ball, so other partitions are dominated."""
    r = _check_relay(topo, relay)
    d_sr = dist(topo.source, r)
    d_rt = np.linalg.norm(topo.positions - np.asarray(r), axis=1)
    radii = sorted({d_sr} | {float(d) for d in topo.source_dists if d >= d_sr})
    out = []
    for rho_s in radii:
        in_t1 = topo.source_dists <= rho_s
        rho_r = float(d_rt[~in_t1].max()) if (~in_t1).any() else 0.0
        a = topo.p_s / (rho_s ** topo.alpha * topo.n0)
        b = math.inf if rho_r == 0.0 else topo.p_r / (rho_r ** topo.alpha * topo.n0)
        ids = [rec.id for rec in topo.receivers]
        out.append(RelayPath(
            frozenset(i for i, m in zip(ids, in_t1) if m),
            frozenset(i for i, m in zip(ids, in_t1) if not m),
            float(rho_s), rho_r, min(a, b),
        ))
    return out


def best_relay_path(topo: Topology, relay) -> RelayPath:
    """Relay path with the highest min-cut at full power; ties go to the
    smaller source radius."""
    best = None
    for path in relay_paths(topo, relay):
        if best is None or path.mincut_full_power > best.mincut_full_power:
            best = path
    return best


@dataclass(frozen=True)
class Allocation:
    """Optimal power split over at most two flow-carrying paths.

    ``lam`` is the fraction of P_s on the source hyperarc of ``relay_path``.
    Usually the second path is the direct hyperarc (s, T); on some relay
    positions two relay paths sharing both budgets do better, in which case
    ``second_path`` is set and the direct path carries nothing.
    """

    lam: float
    relay_path: RelayPath
    rate_relay_path: float
    rate_direct_path: float
    multicast_rate: float
    arbitrary_split: bool = False
    relay_share: float = 0.0
    second_path: RelayPath | None = None
    second_lam: float = 0.0
    second_relay_share: float = 0.0
    rate_second_path: float = 0.0

    @property
    def relay_used(self) -> bool:
        return self.rate_relay_path > 0.0

    @property
    def paths_used(self) -> int:
        return sum(x > 0.0 for x in (self.rate_relay_path, self.rate_direct_path, self.rate_second_path))

    def hyperarc_powers(self, topo: Topology) -> list[tuple[str, float, float]]:
        """(tail, radius, watts) for every hyperarc given positive power."""
        out = []
        if self.rate_relay_path > 0:
            out.append((SOURCE_ID, self.relay_path.rho_s, self.lam * topo.p_s))
            if self.relay_path.rho_r > 0:
                out.append((RELAY_ID, self.relay_path.rho_r, self.relay_share * topo.p_r))
        if self.second_path is not None and self.rate_second_path > 0:
            out.append((SOURCE_ID, self.second_path.rho_s, self.second_lam * topo.p_s))
            out.append((RELAY_ID, self.second_path.rho_r, self.second_relay_share * topo.p_r))
        if self.rate_direct_path > 0:
            direct = 1.0 - self.lam - self.second_lam
            out.append((SOURCE_ID, topo.d_stn, direct * topo.p_s))
        return out


def _solve_paths(a: np.ndarray, b: np.ndarray, c: float):
    """Two-budget LP  max sum(x) + y  s.t.  sum(x/a) + y/c <= 1,  sum(x/b) <= 1.

    Returns (value, choice) where choice is None (direct only), (k,) for
    relay path k plus direct, or (k, j) for two relay paths. Vertices are
    visited in that order and only a strict improvement replaces the
    incumbent, so degenerate ties resolve to the simpler structure.
    """
    best, choice = c, None
    for k in range(len(a)):
        if b[k] >= a[k]:
            val = a[k]
        else:
            val = b[k] + c * (1.0 - b[k] / a[k])
        if val > best * (1.0 + _TIE):
            best, choice = val, (k,)
    for k, j in itertools.combinations(range(len(a)), 2):
        det = 1.0 / (a[k] * b[j]) - 1.0 / (a[j] * b[k])
        if det == 0.0:
            continue
        xk = (1.0 / b[j] - 1.0 / a[j]) / det
        xj = (1.0 / a[k] - 1.0 / b[k]) / det
        if xk > 0 and xj > 0 and xk + xj > best * (1.0 + _TIE):
            best, choice = xk + xj, (k, j)
    return best, choice


def allocate(topo: Topology, relay) -> Allocation:
    paths = [p for p in relay_paths(topo, relay) if p.rho_r > 0.0]
    c = topo.p_s / (topo.d_stn ** topo.alpha * topo.n0)
    a = np.array([p.source_rate(topo) for p in paths])
    b = np.array([p.relay_rate(topo) for p in paths])
    value, choice = _solve_paths(a, b, c)

    if choice is None:
        tie = bool(len(a)) and bool(np.any(np.abs(a - c) <= _TIE * c))
        return Allocation(0.0, best_relay_path(topo, relay), 0.0, value, value, arbitrary_split=tie)
    if len(choice) == 1:
        k = choice[0]
        lam = min(1.0, b[k] / a[k])
        x = min(lam * a[k], b[k])
        direct = (1.0 - lam) * c
        return Allocation(float(lam), paths[k], float(x), float(direct), float(x + direct),
                          relay_share=float(x / b[k]))
    k, j = choice
    det = 1.0 / (a[k] * b[j]) - 1.0 / (a[j] * b[k])
    xk = (1.0 / b[j] - 1.0 / a[j]) / det
    xj = (1.0 / a[k] - 1.0 / b[k]) / det
    return Allocation(
        float(xk / a[k]), paths[k], float(xk), 0.0, float(xk + xj),
        relay_share=float(xk / b[k]), second_path=paths[j], second_lam=float(xj / a[j]),
        second_relay_share=float(xj / b[j]), rate_second_path=float(xj),
    )


def multicast_rate(topo: Topology, relay) -> float:
    return allocate(topo, relay).multicast_rate


def multicast_rates(topo: Topology, points: np.ndarray) -> np.ndarray:
    """Vectorised ``multicast_rate`` over rows of ``points``; NaN where the
    relay coincides with a node."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    alpha, n = topo.alpha, topo.n
    d_st = topo.source_dists
    d_sr = np.linalg.norm(pts - np.asarray(topo.source), axis=1)
    d_rt = np.linalg.norm(pts[:, None, :] - topo.positions[None, :, :], axis=2)
    c = topo.p_s / (topo.d_stn ** alpha * topo.n0)
    # suffix maxima: radius of the relay hyperarc serving receivers k..n-1
    rho_r = np.maximum.accumulate(d_rt[:, ::-1], axis=1)[:, ::-1]
    rho_s = np.maximum(d_sr[:, None], np.r_[0.0, d_st[:-1]][None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        a = topo.p_s / (rho_s ** alpha * topo.n0)
        b = topo.p_r / (rho_r ** alpha * topo.n0)
        lam = np.minimum(1.0, b / a)
        single = np.minimum(lam * a, b) + (1.0 - lam) * c
        best = np.maximum(c, single.max(axis=1))
        for k, j in itertools.combinations(range(n), 2):
            ak, bk, aj, bj = a[:, k], b[:, k], a[:, j], b[:, j]
            det = 1.0 / (ak * bj) - 1.0 / (aj * bk)
            xk = (1.0 / bj - 1.0 / aj) / det
            xj = (1.0 / ak - 1.0 / bk) / det
            ok = (xk > 0) & (xj > 0) & np.isfinite(xk) & np.isfinite(xj)
            best = np.where(ok, np.maximum(best, xk + xj), best)
    coincident = (d_sr == 0.0) | np.any(d_rt == 0.0, axis=1)
    best[coincident] = np.nan
    return best


def cutset_bound(topo: Topology, relay) -> float:
    """Per-destination relay-channel cut-set bound (broadcast cut vs MAC cut),
    minimised over destinations."""
    r = _check_relay(topo, relay)
    alpha, n0 = topo.alpha, topo.n0
    d_sr = dist(topo.source, r)
    best = math.inf
    for d_st, rec in zip(topo.source_dists, topo.receivers):
        d_rt = dist(r, rec.pos)
        bc = topo.p_s * (d_sr ** -alpha + d_st ** -alpha) / n0
        mac = (topo.p_s * d_st ** -alpha + topo.p_r * d_rt ** -alpha) / n0
        best = min(best, bc, mac)
    return float(best)


def cutset_bounds(topo: Topology, points: np.ndarray) -> np.ndarray:
    """Vectorised ``cutset_bound``; inf where the relay sits on the source."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    alpha = topo.alpha
    d_st = topo.source_dists
    d_sr = np.linalg.norm(pts - np.asarray(topo.source), axis=1)
    d_rt = np.linalg.norm(pts[:, None, :] - topo.positions[None, :, :], axis=2)
    with np.errstate(divide="ignore"):
        bc = topo.p_s * (d_sr[:, None] ** -alpha + d_st[None, :] ** -alpha) / topo.n0
        mac = (topo.p_s * d_st[None, :] ** -alpha + topo.p_r * d_rt ** -alpha) / topo.n0
    return np.minimum(bc, mac).min(axis=1)


def ccap_radii(topo: Topology) -> tuple[float, float]:
    """Radii of the source circle and the t_n circle whose intersection holds
    every useful relay position."""
    g, d = topo.bias, topo.d_stn
    return min(d, 2.0 * d / (1.0 + g)), min(d, 2.0 * g * d / (1.0 + g))


def c_cap_contains(topo: Topology, p, center: str = "tn") -> bool:
    """``center='tn'`` puts the second circle on the farthest receiver;
    ``'relay'`` centres it on ``p`` itself, leaving only the source circle."""
    p = as_point(p)
    pi_s, pi_r = ccap_radii(topo)
    if center == "tn":
        other = dist(p, topo.farthest.pos)
    elif center == "relay":
        other = 0.0
    else:
        raise ValueError(f"unknown ccap center {center!r}")
    return dist(p, topo.source) <= pi_s + COVER_TOL and other <= pi_r + COVER_TOL
