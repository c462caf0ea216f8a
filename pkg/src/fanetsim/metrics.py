"""Delivery, delay, throughput and control-overhead metrics."""
from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .link import Packet, PacketKind


class ConservationError(AssertionError):
    pass


def throughput(n_delivered: int, packet_size: int, elapsed: float, b_scale: float = 1.0) -> float:
    """Bits per second: N * S * 8 * B / T."""
    if not elapsed > 0:
        raise ValueError("elapsed must be > 0")
    if not b_scale > 0:
        raise ValueError("b_scale must be > 0")
    return n_delivered * packet_size * 8 * b_scale / elapsed


def end_to_end_delay(pkt: Packet) -> float:
    """Sum of transmit, retransmit, buffer and processing time over all hops, in seconds."""
    if not pkt.hops:
        raise ValueError(f"packet {pkt.id} has no hop record")
    return sum(h.total for h in pkt.hops) / 1e6


def pdr(delivered: int, sent: int) -> tuple[float, bool]:
    """Returns (ratio, vacuous) where vacuous flags the sent == 0 convention."""
    if delivered > sent:
        raise ConservationError(f"delivered {delivered} > sent {sent}")
    if sent == 0:
        return 1.0, True
    return delivered / sent, False


def batch_windows(send_times_us: Sequence[int], batches: Iterable[int],
                  start_us: int = 0) -> dict[int, tuple[int, int]]:
    """Window of batch ``b``: from the first data send at or after ``start_us`` to the ``b``-th one.

    Batches larger than the number of such sends are left out.
    """
    times = sorted(t for t in send_times_us if t >= start_us)
    return {b: (times[0], times[b - 1]) for b in batches if 0 < b <= len(times)}


def overhead(control_times_us: Sequence[int], windows: Mapping[int, tuple[int, int]],
             processing_delay: float) -> dict[int, float]:
    """Control processing time (ms) spent inside each batch's time window.

    ``control_times_us`` are reception times of control packets; each reception
    costs one ``processing_delay``.
    """
    out = {}
    for batch, (t0, t1) in windows.items():
        count = sum(1 for t in control_times_us if t0 <= t <= t1)
        out[batch] = count * processing_delay * 1e3
    return out


@dataclass(frozen=True)
class MetricsReport:
    protocol: str
    speed: float
    seed: int
    sent: int
    delivered: int
    dropped: int
    in_flight_at_end: int
    pdr: float
    pdr_vacuous: bool
    mean_delay: float  # seconds
    throughput: float  # bits/second
    control_messages: int
    control_bytes: int
    data_bytes: int
    control_processing_ms: float
    overhead_ratio: float
    control_by_kind: dict = field(default_factory=dict)
    drops_by_reason: dict = field(default_factory=dict)
    per_flow: dict = field(default_factory=dict)
    trace_hash: str = ""
    events: int = 0

    def check_conservation(self) -> None:
        if self.sent != self.delivered + self.dropped + self.in_flight_at_end:
            raise ConservationError(
                f"sent {self.sent} != delivered {self.delivered} + dropped {self.dropped}"
                f" + in flight {self.in_flight_at_end}")

    def as_row(self) -> dict:
        row = asdict(self)
        for k in ("control_by_kind", "drops_by_reason", "per_flow"):
            row.pop(k)
        return row


class MetricsCollector:
    """Mutable counters owned by one run."""

    def __init__(self, scenario):
        self.sc = scenario
        self.sent = 0
        self.delivered = 0
        self.dropped = 0
        self.live: dict[int, Packet] = {}
        self.delays: list[float] = []
        self.drops_by_reason: Counter = Counter()
        self.control_tx: Counter = Counter()
        self.control_bytes: Counter = Counter()
        self.control_rx: Counter = Counter()
        self.control_rx_times: list[int] = []
        self.data_bytes = 0
        self.data_tx = 0
        self.flow_sent: Counter = Counter()
        self.send_times_us: list[int] = []
        self.flow_delivered: Counter = Counter()
        self.delivered_ids: list[tuple[int, int]] = []

    def on_send(self, pkt: Packet) -> None:
        self.sent += 1
        self.send_times_us.append(pkt.created_us)
        self.live[pkt.id] = pkt
        self.flow_sent[pkt.flow] += 1

    def on_deliver(self, pkt: Packet, now_us: int) -> None:
        if self.live.pop(pkt.id, None) is None:
            return  # already accounted
        self.delivered += 1
        self.flow_delivered[pkt.flow] += 1
        self.delivered_ids.append((pkt.flow, pkt.seq))
        d = end_to_end_delay(pkt)
        clock = (now_us - pkt.created_us) / 1e6
        if abs(d - clock) > 1e-9:
            raise ConservationError(f"packet {pkt.id}: hop sum {d} != clock difference {clock}")
        self.delays.append(d)

    def drop(self, pkt: Packet, reason: str) -> None:
        if pkt.kind is not PacketKind.DATA:
            return
        if self.live.pop(pkt.id, None) is None:
            return
        self.dropped += 1
        self.drops_by_reason[reason] += 1

    def queue_overflow(self, pkt: Packet) -> None:
        self.drop(pkt, "queue")

    def on_control_rx(self, pkt: Packet, now_us: int) -> None:
        self.control_rx[pkt.kind.value] += 1
        self.control_rx_times.append(now_us)

    def report(self, protocol: str, speed: float, seed: int, trace_hash: str = "",
               events: int = 0) -> MetricsReport:
        ratio, vacuous = pdr(self.delivered, self.sent)
        ctrl_bytes = sum(self.control_bytes.values())
        total_bytes = ctrl_bytes + self.data_bytes
        per_flow = {f: (self.flow_sent[f], self.flow_delivered[f]) for f in sorted(self.flow_sent)}
        rep = MetricsReport(
            protocol=protocol,
            speed=speed,
            seed=seed,
            sent=self.sent,
            delivered=self.delivered,
            dropped=self.dropped,
            in_flight_at_end=len(self.live),
            pdr=ratio,
            pdr_vacuous=vacuous,
            mean_delay=statistics.fmean(self.delays) if self.delays else 0.0,
            throughput=throughput(self.delivered, self.sc.packet_size, self.sc.sim_time),
            control_messages=sum(self.control_tx.values()),
            control_bytes=ctrl_bytes,
            data_bytes=self.data_bytes,
            control_processing_ms=sum(self.control_rx.values()) * self.sc.processing_delay * 1e3,
            overhead_ratio=ctrl_bytes / total_bytes if total_bytes else 0.0,
            control_by_kind=dict(sorted(self.control_tx.items())),
            drops_by_reason=dict(sorted(self.drops_by_reason.items())),
            per_flow=per_flow,
            trace_hash=trace_hash,
            events=events,
        )
        rep.check_conservation()
        return rep


# ---- CSV tables ------------------------------------------------------------

TABLE_PROTOCOLS = (("Proposed", "hirol"), ("OLSR", "olsr"), ("DSR", "dsr"))

METRIC_FILES = {
    "pdr": ("pdr.csv", "Speed", "Average PDR"),
    "delay": ("delay.csv", "Speed", "Average Delay"),
    "throughput": ("throughput.csv", "Speed", "Average Throughput"),
    "overhead": ("overhead.csv", "Messages Sent", "Average Overhead"),
}


def aggregate(reports: Iterable[MetricsReport]) -> dict[tuple[str, float], dict[str, float]]:
    """Seed-averaged metrics keyed by (protocol, speed)."""
    groups: dict[tuple[str, float], list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault((r.protocol, r.speed), []).append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        out[key] = {
            "pdr": statistics.fmean(r.pdr for r in rs),
            "delay": statistics.fmean(r.mean_delay for r in rs) * 1e3,  # ms
            "throughput": statistics.fmean(r.throughput for r in rs),
            "overhead_ratio": statistics.fmean(r.overhead_ratio for r in rs),
            "control_processing_ms": statistics.fmean(r.control_processing_ms for r in rs),
            "seeds": len(rs),
        }
    return out


def metric_table(agg: Mapping[tuple[str, float], Mapping[str, float]], metric: str):
    """Rows of (speed, {column: value}) for the protocols present."""
    speeds = sorted({s for _, s in agg})
    protocols = {p for p, _ in agg}
    cols = [(label, p) for label, p in TABLE_PROTOCOLS if p in protocols]
    rows = []
    for s in speeds:
        rows.append((s, {label: agg[(p, s)][metric] for label, p in cols if (p, s) in agg}))
    return cols, rows


def _fmt(v) -> str:
    return repr(float(v))


def write_table(path: Path, key_header: str, average_label: str, cols: Sequence[str],
                rows: Sequence[tuple[float, Mapping[str, float]]]) -> None:
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([key_header, *cols])
        for key, vals in rows:
            w.writerow([_fmt(key), *(_fmt(vals[c]) for c in cols)])
        avg = [_fmt(statistics.fmean(vals[c] for _, vals in rows)) for c in cols]
        w.writerow([average_label, *avg])


def emit_report(reports: Sequence[MetricsReport], out_dir, overhead_rows=None) -> list[Path]:
    """Write pdr/delay/throughput CSVs (and overhead.csv when batch results are given)."""
    if not reports:
        raise ValueError("emit_report needs at least one report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    agg = aggregate(reports)
    written = []
    for metric in ("pdr", "delay", "throughput"):
        fname, key_header, avg_label = METRIC_FILES[metric]
        cols, rows = metric_table(agg, metric)
        labels = [label for label, _ in cols]
        write_table(out_dir / fname, key_header, avg_label, labels, rows)
        written.append(out_dir / fname)
    if overhead_rows:
        fname, key_header, avg_label = METRIC_FILES["overhead"]
        protocols = {p for vals in overhead_rows.values() for p in vals}
        labels = [label for label, p in TABLE_PROTOCOLS if p in protocols]
        rows = [(b, {label: vals[p] for label, p in TABLE_PROTOCOLS if p in vals})
                for b, vals in sorted(overhead_rows.items())]
        write_table(out_dir / fname, key_header, avg_label, labels, rows)
        written.append(out_dir / fname)
    raw = out_dir / "runs.csv"
    with open(raw, "w", newline="") as fh:
        fields = list(reports[0].as_row())
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in reports:
            row = r.as_row()
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    written.append(raw)
    return written


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def coefficient_of_variation(values: Sequence[float]) -> float:
    m = statistics.fmean(values)
    return statistics.pstdev(values) / m if m else math.inf
