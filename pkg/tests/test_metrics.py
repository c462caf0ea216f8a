import math

import pytest
from hypothesis import given, strategies as st

from fanetsim.engine import Simulation
from fanetsim.link import Hop, Packet, PacketKind
from fanetsim.metrics import (ConservationError, MetricsCollector, METRIC_FILES, batch_windows,
                              coefficient_of_variation, emit_report, end_to_end_delay, overhead,
                              pdr, read_table, throughput)
from fanetsim.scenario import Scenario

from conftest import line, static_scenario


# ---- throughput --------------------------------------------------------------------------------

def test_throughput_examples():
    assert throughput(0, 256, 10.0) == 0.0
    assert throughput(1000, 256, 10.0) == 204_800.0
    assert throughput(1000, 256, 20.0) == throughput(1000, 256, 10.0) / 2
    assert throughput(10, 100, 1.0, b_scale=2.0) == 16_000.0


def test_throughput_rejects_empty_interval():
    with pytest.raises(ValueError):
        throughput(5, 256, 0.0)


# ---- delay ------------------------------------------------------------------------------------

def delivered(hops):
    p = Packet(PacketKind.DATA, 0, 1, 256, 0)
    p.hops = [Hop(*h) for h in hops]
    return p


def test_delay_components_add_up():
    assert end_to_end_delay(delivered([(2000, 0, 1000, 500)])) == pytest.approx(0.0035)
    assert end_to_end_delay(delivered([(2000, 0, 1000, 500)] * 2)) == pytest.approx(0.0070)


def test_delay_needs_a_hop_record():
    with pytest.raises(ValueError):
        end_to_end_delay(Packet(PacketKind.DATA, 0, 1, 256, 0))


def test_relay_delays_match_the_event_clock():
    # lossy relay line; on_deliver cross-checks every hop sum against the clock
    sc = static_scenario(line(3), flows=[(0, 2)], lossless=False, sim_time=40.0, edge_loss=0.6)
    sim = Simulation(sc)
    r = sim.run()
    assert r.delivered > 20
    assert all(d >= 2 * (sim.link.data_air_us / 1e6 + sc.processing_delay) - 1e-12 for d in sim.metrics.delays)


def test_delivery_with_wrong_hop_record_is_caught():
    m = MetricsCollector(Scenario())
    p = delivered([(2000, 0, 0, 1000)])
    m.on_send(p)
    with pytest.raises(ConservationError):
        m.on_deliver(p, 5000)


# ---- pdr -----------------------------------------------------------------------------------------

def test_pdr_examples():
    assert pdr(98, 100) == (0.98, False)
    assert pdr(0, 0) == (1.0, True)
    assert pdr(0, 100) == (0.0, False)


def test_pdr_more_delivered_than_sent_is_a_bug():
    with pytest.raises(ConservationError):
        pdr(3, 2)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_pdr_bounds(a, b):
    d, s = min(a, b), max(a, b)
    ratio, _ = pdr(d, s)
    assert 0.0 <= ratio <= 1.0


# ---- overhead ----------------------------------------------------------------------------------

def test_no_control_traffic_costs_nothing():
    assert overhead([], {10: (0, 100), 20: (0, 200)}, 1e-3) == {10: 0.0, 20: 0.0}


def test_overhead_counts_inclusive_windows():
    assert overhead([5, 10, 20, 21], {1: (10, 20)}, 1e-3) == {1: 2.0}


def test_batch_windows():
    sends = [3, 1, 7, 9, 12, 15]
    assert batch_windows(sends, [1, 3, 10]) == {1: (1, 1), 3: (1, 7)}
    assert batch_windows(sends, [2, 3, 4], start_us=8) == {2: (9, 12), 3: (9, 15)}


def test_idle_olsr_line_matches_schedule():
    # 3-node line, no jitter, 60 s after convergence. Hellos: each of the 30 rounds
    # is heard once per neighbour (1 + 2 + 1). TCs: only the middle node has MPR
    # selectors; its 12 TCs reach both ends, which are not relays and stay silent.
    sc = static_scenario(line(3), timer_jitter=0.0, sim_time=100.0, cbr_connections=0, flows=())
    sim = Simulation(sc)
    sim.run()
    hello, tc = 2.0, 5.0
    degrees = (1, 2, 1)
    expected = math.ceil(60 / hello) * sum(degrees) + math.ceil(60 / tc) * 2
    assert expected == 144
    t0 = 30_000_000
    ms = overhead(sim.metrics.control_rx_times, {60: (t0, t0 + 60_000_000 - 1)}, sc.processing_delay)
    assert ms[60] == pytest.approx(expected * sc.processing_delay * 1e3)


# ---- reports and CSV ------------------------------------------------------------------------

def sample_reports():
    out = []
    for proto in ("hirol", "olsr", "dsr"):
        for speed in (5.0, 10.0):
            sc = static_scenario(line(3), flows=[(0, 2)], protocol=proto, lossless=False,
                                 sim_time=20.0, speed=speed, edge_loss=0.6)
            out.append(Simulation(sc, None).run())
    return out


def test_reports_respect_conservation_and_bounds():
    for r in sample_reports():
        assert r.sent == r.delivered + r.dropped + r.in_flight_at_end
        assert 0 <= r.pdr <= 1 and r.throughput >= 0 and r.mean_delay >= 0
        assert r.control_processing_ms >= 0 and 0 <= r.overhead_ratio <= 1


def test_pdr_csv_layout_and_round_trip(tmp_path):
    reports = sample_reports()
    emit_report(reports, tmp_path)
    header, rows = read_table(tmp_path / "pdr.csv")
    assert header == ["Speed", "Proposed", "OLSR", "DSR"]
    assert rows[-1][0] == "Average PDR"
    by = {(r.protocol, r.speed): r.pdr for r in reports}
    for row in rows[:-1]:
        s = float(row[0])
        assert [float(v) for v in row[1:]] == [by[("hirol", s)], by[("olsr", s)], by[("dsr", s)]]
    _, runs = read_table(tmp_path / "runs.csv")
    assert len(runs) == len(reports)


def test_single_report_gives_one_row_plus_equal_average(tmp_path):
    r = sample_reports()[0]
    emit_report([r], tmp_path)
    for metric, value in (("pdr", r.pdr), ("delay", r.mean_delay * 1e3), ("throughput", r.throughput)):
        header, rows = read_table(tmp_path / METRIC_FILES[metric][0])
        assert header == ["Speed", "Proposed"]
        assert len(rows) == 2
        assert float(rows[0][1]) == value and float(rows[1][1]) == value
        assert rows[1][0] == METRIC_FILES[metric][2]


def test_overhead_csv(tmp_path):
    table = {10: {"hirol": 1.0, "olsr": 2.0, "dsr": 3.0}, 20: {"hirol": 4.0, "olsr": 5.0, "dsr": 6.0}}
    emit_report(sample_reports()[:1], tmp_path, table)
    header, rows = read_table(tmp_path / "overhead.csv")
    assert header == ["Messages Sent", "Proposed", "OLSR", "DSR"]
    assert rows[0] == ["10.0", "1.0", "2.0", "3.0"]
    assert rows[-1] == ["Average Overhead", "2.5", "3.5", "4.5"]


def test_emit_report_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(sample_reports()[:1], blocker / "sub")


def test_coefficient_of_variation():
    assert coefficient_of_variation([2.0, 2.0, 2.0]) == 0.0
    assert coefficient_of_variation([1.0, 3.0]) == pytest.approx(0.5)
