"""Event queue, random streams, scenario validation and whole-run basics."""
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from fanetsim import Scenario, ScenarioError, run
from fanetsim.events import Event, EventKind, EventQueue, SchedulingError, schedule, to_us
from fanetsim.rng import RandomStream, make_streams, rng_next

from conftest import static_scenario


def test_earlier_event_dispatches_first():
    q = EventQueue()
    q.schedule(to_us(5.0), EventKind.TIMER_FIRE, "late")
    q.schedule(to_us(3.0), EventKind.TIMER_FIRE, "early")
    assert [q.pop().payload, q.pop().payload] == ["early", "late"]


def test_equal_times_dispatch_by_sequence():
    q = EventQueue()
    schedule(q, Event(to_us(3.0), 8, EventKind.TIMER_FIRE, "b"))
    schedule(q, Event(to_us(3.0), 7, EventKind.TIMER_FIRE, "a"))
    first, second = q.pop(), q.pop()
    assert (first.sequence, second.sequence) == (7, 8)


def test_scheduling_in_the_past_is_an_error():
    q = EventQueue()
    q.schedule(to_us(2.0), EventKind.TIMER_FIRE)
    q.pop()
    with pytest.raises(SchedulingError):
        q.schedule(to_us(1.0), EventKind.TIMER_FIRE)


@given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=1, max_size=200))
def test_random_batches_dispatch_sorted(times):
    q = EventQueue()
    for t in times:
        q.schedule(t, EventKind.TIMER_FIRE)
    out = [q.pop() for _ in times]
    keys = [(e.time, e.sequence) for e in out]
    assert keys == sorted(keys)
    assert [e.time for e in out] == sorted(times)


@given(st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=50),
       st.lists(st.integers(min_value=0, max_value=1000), max_size=50))
def test_clock_never_decreases_with_interleaved_scheduling(first, later):
    q = EventQueue()
    for t in first:
        q.schedule(t, EventKind.TIMER_FIRE)
    seen = []
    extra = iter(later)
    while len(q):
        ev = q.pop()
        seen.append(ev.time)
        nxt = next(extra, None)
        if nxt is not None:
            q.schedule(q.now + nxt, EventKind.TIMER_FIRE)
    assert seen == sorted(seen)


def test_streams_repeat_for_same_seed_and_label():
    a, b = RandomStream(42, "abc"), RandomStream(42, "abc")
    assert [rng_next(a), rng_next(a)] == [rng_next(b), rng_next(b)]


def test_streams_differ_across_labels():
    s = make_streams(42)
    assert s["abc"].random() != s["mobility"].random()


def test_draws_in_unit_interval_with_mean_near_half():
    r = RandomStream(1, "traffic")
    xs = [r.random() for _ in range(100_000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert abs(statistics.fmean(xs) - 0.5) < 0.01


@given(st.integers(min_value=1, max_value=10**6), st.integers(min_value=0, max_value=2**63))
def test_randrange_in_bounds(n, seed):
    r = RandomStream(seed, "loss")
    assert all(0 <= r.randrange(n) < n for _ in range(20))


def test_split_streams_are_independent_of_parent_draws():
    a, b = RandomStream(3, "mobility"), RandomStream(3, "mobility")
    b.random()
    assert a.split("node0").random() == b.split("node0").random()


def test_validation_lists_every_bad_field():
    with pytest.raises(ScenarioError) as exc:
        Scenario(node_count=1, sim_time=0, packet_size=0, arena=(800.0, -1.0, 200.0),
                 speed_set=(5.0, 0.0)).validate()
    text = str(exc.value)
    for name in ("node_count", "sim_time", "packet_size", "arena", "speed_set"):
        assert name in text


def test_defaults_match_simulation_parameters_table():
    sc = Scenario()
    assert sc.node_count == 20
    assert sc.arena == (800.0, 800.0, 200.0)
    assert sc.packet_size == 256
    assert sc.max_cbr_connections == 200
    assert sc.mobility == "random-waypoint"
    assert sc.sim_time == 210.0


def test_lossless_single_hop_delivers_everything():
    sc = static_scenario([(100, 100, 100), (200, 100, 100)], flows=[(0, 1)], protocol="olsr", sim_time=30.0)
    r = run(sc)
    assert r.sent > 0 and r.in_flight_at_end == 0
    assert r.pdr == 1.0


@pytest.mark.parametrize("protocol", ["olsr", "dsr", "hirol"])
def test_out_of_range_pair_delivers_nothing(protocol):
    sc = static_scenario([(0, 0, 0), (700, 700, 0)], flows=[(0, 1)], protocol=protocol, sim_time=30.0)
    r = run(sc)
    assert r.sent > 0
    assert r.pdr == 0.0


def test_same_scenario_twice_is_bit_identical():
    sc = Scenario(protocol="dsr", sim_time=40.0, seed=5)
    assert run(sc) == run(sc)


def test_invalid_scenario_refuses_to_run():
    with pytest.raises(ScenarioError):
        run(Scenario(node_count=0))


@settings(max_examples=5, deadline=None)
@given(st.sampled_from(["olsr", "dsr", "hirol"]), st.integers(min_value=0, max_value=1000),
       st.sampled_from([5.0, 40.0]))
def test_short_runs_conserve_packets(protocol, seed, speed):
    r = run(Scenario(protocol=protocol, seed=seed, speed=speed, sim_time=30.0))
    assert r.sent == r.delivered + r.dropped + r.in_flight_at_end
    assert 0.0 <= r.pdr <= 1.0
