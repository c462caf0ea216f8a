import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fanetsim.ann import LinkClassifier, NetworkWeights
from fanetsim.engine import Simulation
from fanetsim.hirol import (HybridRoutingTable, Strategy, ZoneGrid, choose_route, select_strategy,
                            zone_of)
from fanetsim.mobility import Position3D
from fanetsim.rng import make_streams
from fanetsim.scenario import AbcParams, HirolParams

from conftest import static_scenario

GRID = ZoneGrid()
NO_ANN = HirolParams(use_ann=False)


def hirol(positions, flows, **kw):
    kw.setdefault("hirol_params", NO_ANN)
    return static_scenario(positions, flows=flows, protocol="hirol", **kw)


# ---- zones -----------------------------------------------------------------------------------------

@pytest.mark.parametrize("p, zone", [
    ((0, 0, 0), (0, 0, 0)),
    ((199.9, 200.0, 50), (0, 1, 0)),
    ((799, 799, 199), (3, 3, 0)),
    ((800, 800, 200), (3, 3, 0)),  # far faces clamp into the last cell
    ((-5, 900, 10), (0, 3, 0)),
])
def test_zone_of(p, zone):
    assert zone_of(p, GRID) == zone


def test_default_grid_shape():
    assert GRID.shape == (4, 4, 1)


@given(st.floats(0, 800), st.floats(0, 800), st.floats(0, 200))
def test_every_arena_point_has_one_zone(x, y, z):
    zone = zone_of((x, y, z), GRID)
    assert all(0 <= k < n for k, n in zip(zone, GRID.shape))
    lo = [k * c for k, c in zip(zone, GRID.cell)]
    for v, a, c, n, k in zip((x, y, z), lo, GRID.cell, GRID.shape, zone):
        assert a <= v and (v < a + c or k == n - 1)


def test_select_strategy():
    assert select_strategy((1, 1, 0), (1, 1, 0)) is Strategy.PROACTIVE
    assert select_strategy((1, 1, 0), (2, 1, 0)) is Strategy.REACTIVE
    p = (123.0, 456.0, 7.0)
    assert select_strategy(zone_of(p, GRID), zone_of(p, GRID)) is Strategy.PROACTIVE


# ---- routing table ---------------------------------------------------------------------------------

def test_table_rejects_non_simple_routes():
    t = HybridRoutingTable()
    with pytest.raises(ValueError):
        t.install(3, (0, 1, 0, 3), Strategy.REACTIVE, 0)
    with pytest.raises(ValueError):
        t.install(3, (0, 1, 2), Strategy.REACTIVE, 0)


def test_table_purge_edge():
    t = HybridRoutingTable()
    t.install(3, (0, 1, 3), Strategy.REACTIVE, 0)
    t.install(4, (0, 2, 4), Strategy.PROACTIVE, 0)
    assert t.purge_edge(3, 1) == [3]
    assert t.get(3) is None and t.get(4).route == (0, 2, 4)
    assert t.purge_edge(7, 8) == []


# ---- choose_route ----------------------------------------------------------------------------------

def quality_net():
    """4-1-1 net whose score rises steeply with the quality feature."""
    return NetworkWeights(np.array([[0.0, 20.0, 0.0, 0.0]]), np.array([-10.0]),
                          np.array([[20.0]]), np.array([-10.0]))


def chooser(cands, scores, **kw):
    kw.setdefault("use_abc", True)
    return choose_route(cands, lambda u, v: scores.get((min(u, v), max(u, v)), 1.0),
                        lambda u, v: 1.0, lambda u, v: 0.002, threshold=0.5, node_count=6,
                        abc_params=AbcParams(), rng=make_streams(1)["abc"], **kw)


def test_no_candidates_means_no_route():
    assert chooser([], {}) is None


def test_single_candidate_skips_the_colony():
    c = chooser([(0, 1)], {})
    assert c.route == (0, 1) and not c.used_abc and not c.fallback


def test_diamond_arm_with_unstable_middle_link_is_avoided():
    clf = LinkClassifier(quality_net())
    feats = {(0, 1): (0.5, 1.0, 0, 0.5), (1, 3): (0.5, 0.1, 0, 0.5),
             (0, 2): (0.5, 1.0, 0, 0.5), (2, 3): (0.5, 0.95, 0, 0.5)}
    assert clf.classify(feats[(1, 3)]).label.value == "unstable"
    scores = {e: clf.score(f) for e, f in feats.items()}
    c = chooser([(0, 1, 3), (0, 2, 3)], scores)
    assert c.route == (0, 2, 3)
    assert c.survivors == ((0, 2, 3),)


def test_everything_filtered_falls_back_to_strongest_weakest_link():
    c = chooser([(0, 1, 3), (0, 2, 3)], {(1, 3): 0.2, (2, 3): 0.4})
    assert c.fallback and c.route == (0, 2, 3)


def test_first_survivor_without_colony():
    c = chooser([(0, 1, 2, 3), (0, 4, 3)], {}, use_abc=False)
    assert c.route == (0, 1, 2, 3) and not c.used_abc


def test_colony_picks_a_path_inside_the_survivor_union():
    cands = [(0, 1, 2, 3), (0, 4, 3)]
    c = chooser(cands, {})
    assert c.used_abc
    edges = {frozenset(e) for r in cands for e in zip(r, r[1:])}
    assert all(frozenset(e) in edges for e in zip(c.route, c.route[1:]))
    assert c.route == (0, 4, 3)  # fewer hops, equal quality


@settings(max_examples=50)
@given(st.lists(st.lists(st.integers(1, 6), min_size=0, max_size=3, unique=True), min_size=1, max_size=4),
       st.dictionaries(st.tuples(st.integers(0, 7), st.integers(0, 7)), st.floats(0, 1)))
def test_fallback_totality(mids, scores):
    cands = [(0, *[m for m in mid if m != 7], 7) for mid in mids]
    c = chooser(cands, scores)
    assert c is not None and c.route[0] == 0 and c.route[-1] == 7


# ---- whole protocol ----------------------------------------------------------------------------------

def test_same_zone_pair_uses_the_proactive_direct_route():
    sc = hirol([(50, 50, 50), (150, 50, 50)], [(0, 1)], sim_time=15.0, traffic_start=(10.0, 10.0))
    sim = Simulation(sc)
    r = sim.run()
    a = sim.agents[0]
    entry = a.table.get(1)
    assert entry.route == (0, 1) and entry.strategy is Strategy.PROACTIVE
    assert a.abc_calls == 0 and a.rreq_sent == 0
    assert r.pdr == 1.0


def test_cross_zone_pair_installs_its_discovered_route():
    sc = hirol([(100, 100, 100), (300, 100, 100), (500, 100, 100)], [(0, 2)], sim_time=15.0, traffic_start=(10.0, 10.0))
    sim = Simulation(sc)
    r = sim.run()
    entry = sim.agents[0].table.get(2)
    assert entry.route == (0, 1, 2) and entry.strategy is Strategy.REACTIVE
    assert r.pdr == 1.0


def test_strategy_matches_zones_at_resolution_time():
    from fanetsim.scenario import Scenario
    sc = Scenario(protocol="hirol", sim_time=40.0, seed=3, hirol_params=NO_ANN)
    sim = Simulation(sc)
    sim.run()
    log = [e for a in sim.agents for e in a.strategy_log]
    assert log
    for _, _, mine, theirs, strategy in log:
        expected = Strategy.REACTIVE if theirs is None else select_strategy(mine, theirs)
        assert strategy is expected
    for a in sim.agents:
        for dst, e in a.table.entries.items():
            assert len(set(e.route)) == len(e.route) and e.route[0] == a.node and e.route[-1] == dst


class Jump:
    """Stationary at ``before`` until ``at`` seconds, then at ``after``."""

    def __init__(self, before, after, at):
        self.before, self.after, self.at = Position3D(*before), Position3D(*after), at

    def position(self, t):
        return self.before if t < self.at else self.after

    def velocity(self, t):
        return (0.0, 0.0, 0.0)

    def waypoint_times(self):
        return []


# A(0) - B(1) - C(2) - D(3) is the only path at first; at 30 s C leaves and,
# in the repair run, E(4) arrives between A and D
A, B, C, D = (100, 400, 100), (200, 200, 100), (400, 200, 100), (500, 400, 100)
E_OFF, E_ON, C_OFF = (300, 790, 100), (300, 400, 100), (400, 0, 100)


def break_run(bridge: bool):
    sc = hirol([A, B, C, D, E_OFF], [(0, 3)], sim_time=60.0, traffic_start=(10.0, 10.0))
    sim = Simulation(sc)
    sim.paths[2] = Jump(C, C_OFF, 30.0)
    if bridge:
        sim.paths[4] = Jump(E_OFF, E_ON, 30.0)
    sim.run()
    after = [s for _, s in sim.metrics.delivered_ids if 10.0 + 0.5 * s >= 30.0]
    return sim, after


def test_geometry_of_the_break_scenario():
    near = lambda p, q: math.dist(p, q) <= 250
    assert near(A, B) and near(B, C) and near(C, D)
    assert not near(A, C) and not near(B, D) and not near(A, D)
    assert not any(near(E_OFF, p) for p in (A, B, C, D))
    assert near(A, E_ON) and near(E_ON, D)
    assert not any(near(C_OFF, p) for p in (A, B, D))


def test_link_break_repairs_onto_the_alternate():
    sim, after = break_run(True)
    _, control_after = break_run(False)
    assert control_after == []
    assert len(after) > 0.8 * 60  # sends between 30 s and 60 s
    assert sim.agents[0].table.get(3).route == (0, 4, 3)


def test_break_on_unused_edge_changes_nothing():
    sc = hirol([A, B, C, D, E_OFF], [(0, 3)], sim_time=12.0, traffic_start=(10.0, 10.0))
    sim = Simulation(sc)
    sim.run()
    a = sim.agents[0]
    before = dict(a.table.entries)
    assert a.table.purge_edge(4, 1) == []
    assert a.table.entries == before
