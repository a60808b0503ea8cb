import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relayorp import oracle
from relayorp.channel import (
    Receiver,
    Topology,
    allocate,
    best_relay_path,
    build_hypergraph,
    c_cap_contains,
    ccap_radii,
    cutset_bound,
    cutset_bounds,
    hyperarc_rate,
    multicast_rate,
    multicast_rates,
    relay_paths,
)
from relayorp.errors import CoincidentNodesError, TopologyError
from relayorp.geometry import Point2

from conftest import make_topo, random_topo, topologies


def _relay_in_hull(topo, rng):
    w = rng.dirichlet(np.ones(topo.n + 1))
    return Point2(*(w @ topo.node_array()))


# -- topology -----------------------------------------------------------------

def test_receivers_sorted_by_distance():
    topo = make_topo([(3, 0), (1, 0), (0, 2)])
    assert [r.id for r in topo.receivers] == ["t2", "t3", "t1"]
    assert topo.farthest.id == "t1" and topo.d_stn == 3


@pytest.mark.parametrize(
    "kw, recs",
    [
        ({}, []),
        ({}, [("a", (1, 0)), ("a", (2, 0))]),
        ({"gamma": 0.0}, [("a", (1, 0))]),
        ({"alpha": 1.5}, [("a", (1, 0))]),
        ({"n0": -1.0}, [("a", (1, 0))]),
        ({}, [("s", (1, 0))]),
    ],
)
def test_topology_rejects_invalid(kw, recs):
    with pytest.raises(TopologyError):
        Topology((0, 0), tuple(Receiver(i, p) for i, p in recs), **kw)


def test_receiver_on_source_is_coincident():
    with pytest.raises(CoincidentNodesError):
        make_topo([(0, 0)])


# -- hyperarcs ----------------------------------------------------------------

def test_hyperarc_rate_examples():
    assert hyperarc_rate(1, 2, 2, 1) == 0.25
    assert hyperarc_rate(0, 3.7, 2, 1) == 0.0
    assert hyperarc_rate(1, 1.5, 2, 1) == pytest.approx(0.4444444444444444)


def test_hyperarc_rate_errors():
    with pytest.raises(CoincidentNodesError, match="coincident nodes"):
        hyperarc_rate(1, 0, 2, 1)
    with pytest.raises(ValueError):
        hyperarc_rate(-1, 1, 2, 1)


@given(
    st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100),
    st.sampled_from([2.0, 3.0, 4.0]),
)
def test_hyperarc_rate_monotone(p1, p2, d1, d2, alpha):
    if p1 < p2:
        assert hyperarc_rate(p1, 1.0, alpha, 1.0) < hyperarc_rate(p2, 1.0, alpha, 1.0)
    if d1 < d2:
        assert hyperarc_rate(1.0, d1, alpha, 1.0) > hyperarc_rate(1.0, d2, alpha, 1.0)


def test_hypergraph_single_receiver():
    hg = build_hypergraph(make_topo([(2, 0)]), (1, 0))
    arcs = {(a.tail, a.heads): a.radius for a in hg.arcs}
    assert arcs == {
        ("s", frozenset({"r"})): 1.0,
        ("r", frozenset({"t1"})): 1.0,
        ("s", frozenset({"r", "t1"})): 2.0,
    }


@pytest.mark.parametrize("n", [2, 5, 9])
def test_hypergraph_arc_count(n, rng):
    topo = random_topo(rng, n)
    hg = build_hypergraph(topo, _relay_in_hull(topo, rng))
    assert len(hg.arcs) == 2 * n + 1
    assert len(hg.source_arcs) == n + 1 and len(hg.relay_arcs) == n


def test_hypergraph_radius_is_farthest_head(rng):
    topo = random_topo(rng, 6)
    r = _relay_in_hull(topo, rng)
    pos = {t.id: t.pos for t in topo.receivers} | {"r": r, "s": topo.source}
    for a in build_hypergraph(topo, r).arcs:
        far = max(math.dist(pos[a.tail], pos[h]) for h in a.heads)
        assert a.radius == pytest.approx(far)
        assert a.rate_per_watt == pytest.approx(1 / (a.radius ** topo.alpha * topo.n0))


def test_hypergraph_rejects_coincident_relay():
    topo = make_topo([(2, 0)])
    for bad in [(0, 0), (2, 0)]:
        with pytest.raises(CoincidentNodesError):
            build_hypergraph(topo, bad)


# -- relay paths ----------------------------------------------------------------

def test_best_path_single_receiver():
    p = best_relay_path(make_topo([(2, 0)]), (1, 0))
    assert p.t1 == frozenset() and p.t2 == {"t1"}
    assert (p.rho_s, p.rho_r, p.mincut_full_power) == (1, 1, 1)


def test_best_path_near_receiver_is_min_of_legs():
    eps = 1e-3
    p = best_relay_path(make_topo([(2, 0)]), (2 - eps, 0))
    assert p.rho_s == pytest.approx(2 - eps)
    assert p.mincut_full_power == pytest.approx(min((2 - eps) ** -2, eps ** -2))


def test_best_path_two_receivers():
    topo = make_topo([(3, 0), (4, 0)])
    assert sorted(p.rho_s for p in relay_paths(topo, (2, 0))) == [2, 3, 4]
    p = best_relay_path(topo, (2, 0))
    assert p.rho_s == 2 and p.rho_r == 2 and p.t2 == {"t1", "t2"}
    assert p.mincut_full_power == 0.25
    brute = oracle.enumerate_partitions(topo, (2, 0))
    assert (brute.rho_s, brute.rho_r, brute.mincut_full_power) == (2, 2, 0.25)


def test_best_path_matches_partition_enumeration(rng):
    for _ in range(40):
        topo = random_topo(rng, int(rng.integers(1, 11)), gamma=float(rng.choice([0.25, 1, 4])))
        r = _relay_in_hull(topo, rng)
        fast, brute = best_relay_path(topo, r), oracle.enumerate_partitions(topo, r)
        assert fast.mincut_full_power == pytest.approx(brute.mincut_full_power, rel=1e-12)
        assert fast.rho_s == pytest.approx(brute.rho_s, rel=1e-12)


@given(topologies(max_n=6), st.floats(0, 1), st.floats(0, 1))
def test_path_invariants(topo, u, v):
    x0, y0, x1, y1 = topo.hull.bounds()
    r = Point2(x0 + u * (x1 - x0) + 1e-3, y0 + v * (y1 - y0) + 1e-3)
    ids = {t.id for t in topo.receivers}
    d_sr = math.dist(r, topo.source)
    for p in relay_paths(topo, r):
        assert p.t1 | p.t2 == ids and not (p.t1 & p.t2)
        assert p.rho_s >= d_sr


# -- allocation -------------------------------------------------------------------

def test_allocate_single_receiver_optimum():
    a = allocate(make_topo([(2, 0)]), (1, 0))
    assert a.lam == 1.0 and a.multicast_rate == 1.0 and a.rate_direct_path == 0.0


def test_allocate_far_relay_is_useless():
    a = allocate(make_topo([(2, 0)]), (1, 10))
    assert a.lam == 0.0 and not a.relay_used
    assert a.multicast_rate == a.rate_direct_path == 0.25


def test_allocate_lambda_one_ninth():
    a = allocate(make_topo([(4, 0)]), (1, 0))
    assert a.lam == pytest.approx(1 / 9)
    assert a.multicast_rate == pytest.approx(1 / 9 + (8 / 9) / 16)
    assert a.multicast_rate == pytest.approx(0.16666666666666666, rel=1e-12)  # hyperarc LP


def test_rate_quarter_point():
    # lambda sweep and hyperarc LP both give 2/3 (at lambda = 1/9)
    assert multicast_rate(make_topo([(2, 0)]), (0.5, 0)) == pytest.approx(0.6666666666666666, rel=1e-12)


def test_rate_drops_off_the_bisector():
    topo = make_topo([(2, 0)])
    assert multicast_rate(topo, (1, 3)) < multicast_rate(topo, (1, 0))


def test_allocation_sums_and_budgets(rng):
    for _ in range(200):
        topo = random_topo(rng, int(rng.integers(1, 8)), gamma=float(rng.choice([0.25, 1, 4])))
        r = _relay_in_hull(topo, rng)
        a = allocate(topo, r)
        parts = a.rate_relay_path + a.rate_direct_path + a.rate_second_path
        assert a.multicast_rate == pytest.approx(parts, rel=1e-12)
        assert a.paths_used <= 2
        assert 0 <= a.lam <= 1 and 0 <= a.lam + a.second_lam <= 1 + 1e-12
        assert a.relay_share + a.second_relay_share <= 1 + 1e-12
        src = sum(w for tail, _, w in a.hyperarc_powers(topo) if tail == "s")
        rel = sum(w for tail, _, w in a.hyperarc_powers(topo) if tail == "r")
        assert src <= topo.p_s * (1 + 1e-12) and rel <= topo.p_r * (1 + 1e-12)


def _powers_on_arcs(topo, hg, alloc):
    """Place the allocation's (tail, radius, watts) on matching hyperarcs."""
    powers = np.zeros(len(hg.arcs))
    for tail, radius, watts in alloc.hyperarc_powers(topo):
        idx = [i for i, a in enumerate(hg.arcs) if a.tail == tail and abs(a.radius - radius) <= 1e-12 * radius]
        powers[idx[-1]] += watts
    return powers


def test_allocation_is_feasible_on_the_hypergraph(rng):
    for _ in range(100):
        topo = random_topo(rng, int(rng.integers(1, 6)), gamma=float(rng.choice([0.25, 1, 4])))
        r = _relay_in_hull(topo, rng)
        a = allocate(topo, r)
        hg = build_hypergraph(topo, r)
        assert oracle.cut_rate(topo, hg, _powers_on_arcs(topo, hg, a)) == pytest.approx(a.multicast_rate, rel=1e-9)


def test_allocate_matches_hyperarc_lp(rng):
    for _ in range(150):
        topo = random_topo(rng, int(rng.integers(1, 6)), gamma=float(rng.choice([0.25, 1, 4])),
                           alpha=float(rng.choice([2, 3, 4])))
        r = _relay_in_hull(topo, rng)
        lp, _ = oracle.hyperarc_lp(topo, r)
        assert multicast_rate(topo, r) == pytest.approx(lp, rel=1e-7)


def test_two_relay_paths_can_beat_one():
    # found by random search; the LP optimum uses two relay paths here
    rng = np.random.default_rng(3)
    found = False
    for _ in range(400):
        topo = random_topo(rng, int(rng.integers(2, 6)), gamma=float(rng.choice([0.25, 1, 4])))
        r = _relay_in_hull(topo, rng)
        a = allocate(topo, r)
        if a.second_path is not None:
            found = True
            assert a.rate_direct_path == 0.0 and a.paths_used == 2
            assert a.multicast_rate == pytest.approx(oracle.hyperarc_lp(topo, r)[0], rel=1e-7)
    assert found


def test_arbitrary_split_flag_on_tie():
    # relay a hair inside distance D_stn behind the source: the relay path's
    # source hyperarc is as slow as the direct one, so any split is optimal
    topo = make_topo([(2, 0)])
    a = allocate(topo, (-2 + 1e-13, 0))
    assert a.lam == 0.0
    assert a.arbitrary_split


def test_allocate_beats_lambda_sweep(rng):
    for _ in range(100):
        topo = random_topo(rng, int(rng.integers(1, 7)), gamma=float(rng.choice([0.25, 1, 4])))
        r = _relay_in_hull(topo, rng)
        _, swept = oracle.lambda_sweep(topo, r, 2001)
        assert multicast_rate(topo, r) >= swept - 1e-9 * topo.p_s / topo.n0


def test_vectorised_rates_match_scalar(rng):
    for _ in range(30):
        topo = random_topo(rng, int(rng.integers(1, 8)), gamma=float(rng.choice([0.25, 1, 4])))
        pts = np.array([_relay_in_hull(topo, rng) for _ in range(20)])
        scalar = [multicast_rate(topo, p) for p in pts]
        np.testing.assert_allclose(multicast_rates(topo, pts), scalar, rtol=1e-12)
        np.testing.assert_allclose(cutset_bounds(topo, pts), [cutset_bound(topo, p) for p in pts], rtol=1e-12)
        np.testing.assert_allclose(oracle.grid_rates(topo, pts), scalar, rtol=1e-12)


def test_vectorised_rate_nan_on_nodes():
    topo = make_topo([(2, 0), (0, 2)])
    r = multicast_rates(topo, np.array([[0, 0], [2, 0], [1, 1]]))
    assert np.isnan(r[0]) and np.isnan(r[1]) and np.isfinite(r[2])


# -- usefulness -------------------------------------------------------------------

def test_relay_beyond_farthest_receiver_is_useless(rng):
    for _ in range(200):
        topo = random_topo(rng, int(rng.integers(1, 7)), gamma=float(rng.choice([0.25, 1, 4])))
        ang = rng.uniform(0, 2 * math.pi)
        rad = topo.d_stn * rng.uniform(1.0, 3.0)
        r = (topo.source.x + rad * math.cos(ang), topo.source.y + rad * math.sin(ang))
        a = allocate(topo, r)
        assert a.lam == 0.0 and not a.relay_used


def test_relay_outside_ccap_can_still_help():
    # outside both the source-centred and t_n-centred lens, yet the relay
    # lifts the rate above the direct 1/4 by serving the receiver behind s
    topo = make_topo([(-1.9, 0), (2, 0)])
    r = (-1, 0)
    assert not c_cap_contains(topo, r)
    a = allocate(topo, r)
    assert a.relay_used
    assert a.multicast_rate == pytest.approx(1 / 3, rel=1e-12)
    assert oracle.hyperarc_lp(topo, r)[0] == pytest.approx(1 / 3, rel=1e-9)


# -- cut-set bound and C-cap ------------------------------------------------------

def test_cutset_midpoint():
    assert cutset_bound(make_topo([(2, 0)]), (1, 0)) == 1.25


def test_cutset_powerless_relay_limit():
    topo = make_topo([(2, 0), (1, 1)], gamma=1e-12)
    assert cutset_bound(topo, (1, 0.5)) == pytest.approx(0.25, rel=1e-9)


def test_cutset_dominates_rate(rng):
    for _ in range(1000):
        topo = random_topo(rng, int(rng.integers(1, 7)), gamma=float(rng.choice([0.25, 1, 4])),
                           alpha=float(rng.choice([2, 3, 4])))
        r = _relay_in_hull(topo, rng)
        if min(math.dist(r, p) for p in topo.node_array()) < 1e-9:
            continue
        assert cutset_bound(topo, r) >= multicast_rate(topo, r) - 1e-9


@given(topologies(max_n=5), st.floats(0.1, 10), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=60)
def test_scaling_homogeneity(topo, k, u, v):
    x0, y0, x1, y1 = topo.hull.bounds()
    r = Point2(x0 + u * (x1 - x0) + 1e-3, y0 + v * (y1 - y0) + 1e-3)
    if min(math.dist(r, p) for p in topo.node_array()) < 1e-3:
        return
    big = topo.scaled(k)
    rk = (r.x * k, r.y * k)
    f = k ** -topo.alpha
    a, b = allocate(topo, r), allocate(big, rk)
    assert b.multicast_rate == pytest.approx(f * a.multicast_rate, rel=1e-9)
    assert cutset_bound(big, rk) == pytest.approx(f * cutset_bound(topo, r), rel=1e-9)
    assert b.lam == pytest.approx(a.lam, abs=1e-9)


def test_ccap_examples():
    topo = make_topo([(2, 0)])
    assert ccap_radii(topo) == (2, 2)
    assert c_cap_contains(topo, (1, 0))
    assert c_cap_contains(topo, (2, 0))
    assert not c_cap_contains(topo, (2.5, 0))


def test_ccap_relay_centre_reading():
    topo = make_topo([(2, 0)], gamma=0.25)
    # t_n circle shrinks with a weak relay; the relay-centred reading keeps only the source circle
    assert not c_cap_contains(topo, (0.3, 0), center="tn")
    assert c_cap_contains(topo, (0.3, 0), center="relay")
    with pytest.raises(ValueError):
        c_cap_contains(topo, (0.3, 0), center="bogus")
