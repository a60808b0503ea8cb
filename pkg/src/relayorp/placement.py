"""Relay positioning: closed forms for the segment cases, the three-step
ORP construction, and a rate-driven refinement of its output."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import channel
from .channel import Allocation, Topology
from .errors import TopologyError
from .geometry import Point2, dist, minimax_point, polish_minimax, project_many

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
COVER_TOL = 1e-9


class OrpStep(str, Enum):
    CLOSED_FORM = "closed_form"
    STEP1 = "step1_l0"
    STEP2 = "step2_l1"
    STEP3 = "step3_l2"
    MIDPOINT = "midpoint_case"


@dataclass(frozen=True)
class Stage:
    """An intermediate point of the construction. ``zeta`` is
    max(bias * pi_s, pi_r) for the hyperarcs that step forms: pi_s is the
    source radius, pi_r the relay radius over the receivers left to it."""

    label: str
    point: Point2
    rate: float
    zeta: float


@dataclass(frozen=True)
class PlacementResult:
    relay: Point2
    multicast_rate: float
    orp_step: OrpStep
    radii: tuple[float, float]
    sets: dict[str, tuple[str, ...]]
    allocation: Allocation
    orp_relay: Point2
    orp_rate: float
    refined: bool = False
    stages: tuple[Stage, ...] = field(default=())

    @property
    def refinement_gain(self) -> float:
        return self.multicast_rate - self.orp_rate


def _result(topo, relay, step, sets=None, stages=(), orp_relay=None, orp_rate=None, refined=False):
    relay = Point2(float(relay[0]), float(relay[1]))
    alloc = channel.allocate(topo, relay)
    path = alloc.relay_path
    rate = alloc.multicast_rate
    return PlacementResult(
        relay=relay,
        multicast_rate=rate,
        orp_step=step,
        radii=(path.rho_s, path.rho_r),
        sets=sets or {"N0": (), "N1": (), "N2": ()},
        allocation=alloc,
        orp_relay=relay if orp_relay is None else orp_relay,
        orp_rate=rate if orp_rate is None else orp_rate,
        refined=refined,
        stages=tuple(stages),
    )


def _segment_point(topo: Topology) -> Point2:
    s, t = np.asarray(topo.source), np.asarray(topo.farthest.pos)
    p = s + (t - s) / (1.0 + topo.bias)
    return Point2(float(p[0]), float(p[1]))


def optimal_single_dest(topo: Topology) -> PlacementResult:
    if topo.n != 1:
        raise TopologyError(f"single-destination closed form needs exactly one receiver, got {topo.n}")
    return _result(topo, _segment_point(topo), OrpStep.CLOSED_FORM)


def try_segment_case(topo: Topology) -> PlacementResult | None:
    """Relay on s-t_n at D_stn / (1 + bias); valid only when the source circle
    (radius D_sr) and the relay circle (radius D_rtn) together cover T."""
    r = _segment_point(topo)
    rad_s = dist(topo.source, r)
    rad_r = dist(r, topo.farthest.pos)
    for rec, d_st in zip(topo.receivers, topo.source_dists):
        if d_st > rad_s + COVER_TOL and dist(r, rec.pos) > rad_r + COVER_TOL:
            return None
    step = OrpStep.CLOSED_FORM if topo.n == 1 else OrpStep.MIDPOINT
    return _result(topo, r, step)


def _program(topo, targets, tol, seed):
    return minimax_point(topo.source, topo.bias, [t.pos for t in targets], topo.hull, tol=tol, seed=seed)


def _n0_set(topo: Topology, l0: Point2, rule: str) -> list[int]:
    g = topo.bias
    d_sl0 = dist(topo.source, l0)
    out = []
    for i, (rec, d_st) in enumerate(zip(topo.receivers, topo.source_dists)):
        d_l0t = dist(l0, rec.pos)
        if rule == "sec4":
            hit = g * d_st < d_l0t and d_l0t > g * d_sl0
        elif rule == "sec5":
            hit = g * d_sl0 > d_l0t
        else:
            raise ValueError(f"unknown N0 rule {rule!r}")
        if hit:
            out.append(i)
    return out


def _covers(topo: Topology, r, rad_s: float, rad_r: float) -> bool:
    return all(
        d_st <= rad_s + COVER_TOL or dist(r, rec.pos) <= rad_r + COVER_TOL
        for rec, d_st in zip(topo.receivers, topo.source_dists)
    )


def _stage(topo, label, p, relay_targets, source_radius=0.0) -> Stage:
    p = Point2(float(p[0]), float(p[1]))
    pi_s = max(dist(topo.source, p), source_radius)
    pi_r = max((dist(p, t.pos) for t in relay_targets), default=0.0)
    zeta = max(topo.bias * pi_s, pi_r)
    return Stage(label, p, channel.multicast_rate(topo, p), zeta)


def orp_steps(topo: Topology, n0_rule: str = "sec4", tol: float = DEFAULT_TOL, seed: int = 0):
    """The three-step construction. Returns (point, step, sets, stages)."""
    recs = topo.receivers
    ids = [r.id for r in recs]
    l0 = _program(topo, recs, tol, seed).point
    stages = [_stage(topo, "l0", l0, recs)]
    n0 = _n0_set(topo, l0, n0_rule)
    sets = {"N0": tuple(ids[i] for i in n0), "N1": (), "N2": ()}
    if not n0:
        return l0, OrpStep.STEP1, sets, stages

    n1 = [i for i in range(len(recs)) if i not in n0]
    sets["N1"] = tuple(ids[i] for i in n1)
    if n1:
        l1 = _program(topo, [recs[i] for i in n1], tol, seed).point
        stages.append(_stage(topo, "l1", l1, [recs[i] for i in n1]))
        rad_r = max(dist(l1, recs[i].pos) for i in n1)
        if _covers(topo, l1, dist(topo.source, l1), rad_r):
            return l1, OrpStep.STEP2, sets, stages

    # farthest member of N0; equal distances resolve to the later index
    m = max(n0, key=lambda i: (topo.source_dists[i], i))
    n2 = [i for i in range(len(recs)) if topo.source_dists[i] > topo.source_dists[m]]
    sets["N2"] = tuple(ids[i] for i in n2)
    d_m = float(topo.source_dists[m])
    if not n2:
        # t_n itself is in N0: the reformed source circle covers T alone
        stages.append(_stage(topo, "l2", l0, [], d_m))
        return l0, OrpStep.STEP3, sets, stages
    l2 = _program(topo, [recs[i] for i in n2], tol, seed).point
    stages.append(_stage(topo, "l2", l2, [recs[i] for i in n2], d_m))
    return l2, OrpStep.STEP3, sets, stages


# -- refinement ---------------------------------------------------------------

def _rates(topo: Topology, pts: np.ndarray) -> np.ndarray:
    r = channel.multicast_rates(topo, pts)
    return np.where(np.isnan(r), -np.inf, r)


def _scan_point(topo, centers_k, w, x0):
    weights = np.r_[w, np.ones(len(centers_k) - 1)]
    return polish_minimax(topo.hull, centers_k, weights, x0)


def _weight_scan(topo: Topology, n_weights: int = 13, span: float = 8.0):
    """Weighted minimax points for every suffix T[k:] of receivers and a
    geometric range of source weights. Each suffix is one distance-threshold
    relay path; sweeping the weight walks the Pareto front between the
    source-hyperarc and relay-hyperarc radii."""
    s = np.asarray(topo.source)
    weights = topo.bias * np.geomspace(1.0 / span, span, n_weights)
    out = []
    for k in range(topo.n):
        centers = np.vstack([s, topo.positions[k:]])
        x = topo.positions[k:].mean(axis=0)
        for w in weights:
            x = _scan_point(topo, centers, w, x)
            out.append((k, float(w), x.copy()))
    return out, weights


def _golden_weight(topo, k, lo, hi, x0, iters=30):
    s = np.asarray(topo.source)
    centers = np.vstack([s, topo.positions[k:]])

    def f(logw):
        p = _scan_point(topo, centers, math.exp(logw), x0)
        return float(_rates(topo, p[None, :])[0]), p

    a, b = math.log(lo), math.log(hi)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = b - phi * (b - a), a + phi * (b - a)
    (f1, p1), (f2, p2) = f(x1), f(x2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2, p2 = x2, x1, f1, p1
            x1 = b - phi * (b - a)
            f1, p1 = f(x1)
        else:
            a, x1, f1, p1 = x1, x2, f2, p2
            x2 = a + phi * (b - a)
            f2, p2 = f(x2)
    return (p1, f1) if f1 >= f2 else (p2, f2)


def _compass(topo: Topology, x: np.ndarray, fx: float, n_dirs: int = 16):
    """Pattern search on the exact rate, projected onto the hull."""
    scale = max(topo.hull.diameter, 1e-12)
    step = 0.02 * scale
    ang = np.linspace(0.0, 2.0 * math.pi, n_dirs, endpoint=False)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    while step > 1e-11 * scale:
        cand = project_many(topo.hull, x[None, :] + step * dirs)
        fc = _rates(topo, cand)
        j = int(np.argmax(fc))
        if fc[j] > fx:
            x, fx = cand[j], float(fc[j])
        else:
            step *= 0.5
    return x, fx


def refine(topo: Topology, seeds: list) -> tuple[Point2, float]:
    """Maximise the exact multicast rate starting from ``seeds`` and from the
    weighted-minimax Pareto scan; deterministic."""
    scan, weights = _weight_scan(topo)
    pts = np.array([np.asarray(p, dtype=float) for p in seeds] + [p for _, _, p in scan])
    rates = _rates(topo, pts)
    n_seeds = len(seeds)

    finalists = []
    order = np.argsort(-rates, kind="stable")
    seen_k = set()
    for idx in order:
        if len(finalists) >= 3:
            break
        if idx < n_seeds:
            finalists.append((pts[idx], rates[idx]))
            continue
        k, w, p = scan[idx - n_seeds]
        if k in seen_k:
            continue
        seen_k.add(k)
        i = int(np.flatnonzero(np.isclose(weights, w))[0])
        lo = weights[max(i - 1, 0)]
        hi = weights[min(i + 1, len(weights) - 1)]
        gp, gf = _golden_weight(topo, k, lo, hi, p)
        finalists.append((gp, gf) if gf > rates[idx] else (p, rates[idx]))

    best_x, best_f = None, -np.inf
    for x, fx in finalists:
        x, fx = _compass(topo, np.asarray(x, dtype=float), float(fx))
        if fx > best_f:
            best_x, best_f = x, fx
    return Point2(float(best_x[0]), float(best_x[1])), float(best_f)


def orp(
    topo: Topology,
    n0_rule: str = "sec4",
    refine_rate: bool = True,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> PlacementResult:
    """Optimal relay position.

    The segment shortcut and the three-step construction both run; the
    shortcut replaces the ORP point only when its rate is strictly higher. With ``refine_rate`` the winner then seeds a
    search on the exact rate; ``orp_relay``/``orp_rate`` keep the
    unrefined point so the two can be compared.
    """
    if topo.n == 1:
        closed = optimal_single_dest(topo)
        return closed

    point, step, sets, stages = orp_steps(topo, n0_rule, tol, seed)
    rate = channel.multicast_rate(topo, point)
    seg = try_segment_case(topo)
    if seg is not None and abs(seg.multicast_rate - rate) > 1e-9 * rate:
        log.warning("segment shortcut rate %.9g differs from ORP rate %.9g", seg.multicast_rate, rate)
        if seg.multicast_rate > rate:
            point, step, rate = seg.relay, seg.orp_step, seg.multicast_rate

    if not refine_rate:
        return _result(topo, point, step, sets, stages)

    seeds = [point] + [st.point for st in stages]
    best, best_rate = refine(topo, seeds)
    if best_rate > rate * (1.0 + 1e-12):
        log.info("refinement raised the rate from %.9g to %.9g", rate, best_rate)
        return _result(topo, best, step, sets, stages, orp_relay=point, orp_rate=rate, refined=True)
    return _result(topo, point, step, sets, stages)
