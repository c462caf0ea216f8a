"""Radio connectivity and per-hop delivery.

Unit-disk connectivity, a per-node FIFO transmitter at a fixed bitrate,
distance-dependent loss and link-layer retries for unicast frames.
Every hop a delivered packet takes is recorded as (T_t, R_t, B_t, P_rt) so the
end-to-end delay can be decomposed exactly.
"""
from __future__ import annotations

import enum
import itertools
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .events import EventKind, EventQueue, to_us
from .mobility import distance


class PacketKind(str, enum.Enum):
    DATA = "data"
    HELLO = "hello"
    TC = "tc"
    RREQ = "rreq"
    RREP = "rrep"
    RERR = "rerr"


CONTROL_KINDS = (PacketKind.HELLO, PacketKind.TC, PacketKind.RREQ, PacketKind.RREP, PacketKind.RERR)
BROADCAST = -1
HEADER_BYTES = 24


@dataclass(slots=True)
class Hop:
    transmit: int  # T_t, microseconds
    retransmit: int  # R_t
    buffer: int  # B_t
    processing: int  # P_rt

    @property
    def total(self) -> int:
        return self.transmit + self.retransmit + self.buffer + self.processing


_packet_ids = itertools.count(1)


@dataclass(slots=True, eq=False)
class Packet:
    kind: PacketKind
    src: int
    dst: int
    payload_size: int
    created_us: int
    route_record: list = field(default_factory=list)
    payload: Any = None
    flow: int = -1
    seq: int = -1
    id: int = 0
    hop_index: int = 0
    hops: list = field(default_factory=list)
    custody_since: int = -1

    def __post_init__(self):
        if self.id == 0:
            self.id = next(_packet_ids)
        if self.custody_since < 0:
            self.custody_since = self.created_us

    @property
    def created_at(self) -> float:
        return self.created_us / 1e6

    @property
    def is_control(self) -> bool:
        return self.kind is not PacketKind.DATA


@dataclass(frozen=True)
class LinkSample:
    a: int
    b: int
    time: float
    distance: float
    delivered: bool


def in_range(p, q, radio_range: float) -> bool:
    return distance(p, q) <= radio_range


class LinkLayer:
    """Shared radio medium for one simulation run."""

    def __init__(self, scenario, queue: EventQueue, paths, loss_rng, metrics):
        self.sc = scenario
        self.queue = queue
        self.paths = paths
        self.rng = loss_rng
        self.metrics = metrics
        self.n = scenario.node_count
        self.range = scenario.radio_range
        self.bitrate = scenario.bitrate
        self.proc_us = to_us(scenario.processing_delay)
        self.retry_us = to_us(scenario.retry_timeout)
        self.data_air_us = self.airtime(scenario.packet_size)
        self.max_backlog_us = scenario.queue_capacity * self.data_air_us
        self.busy_until = [0] * self.n
        self.samples: dict[tuple[int, int], deque] = defaultdict(deque)
        self.sample_horizon_us = to_us(scenario.ann_params.quality_window)
        self._counts: dict[tuple[int, int], list] = {}
        self.hop_delivered = 0
        self.hop_lost = 0
        self.on_failure: Callable[[int, Packet, int], None] = lambda node, pkt, to: None
        self._pos_time = -1
        self._pos_cache: dict[int, tuple] = {}

    # geometry -------------------------------------------------------------
    def position(self, node: int, t_us: int):
        if t_us != self._pos_time:
            self._pos_time = t_us
            self._pos_cache = {}
        p = self._pos_cache.get(node)
        if p is None:
            p = self.paths[node].position(t_us / 1e6)
            self._pos_cache[node] = p
        return p

    def velocity(self, node: int, t_us: int):
        return self.paths[node].velocity(t_us / 1e6)

    def distance(self, a: int, b: int, t_us: int) -> float:
        return distance(self.position(a, t_us), self.position(b, t_us))

    def neighbors(self, node: int, t_us: int) -> list[tuple[int, float]]:
        p = self.position(node, t_us)
        out = []
        for other in range(self.n):
            if other != node:
                d = distance(p, self.position(other, t_us))
                if d <= self.range:
                    out.append((other, d))
        return out

    def loss_probability(self, d: float) -> float:
        if d > self.range:
            return 1.0
        p = self.sc.p_loss + self.sc.edge_loss * (d / self.range) ** self.sc.loss_exponent
        return min(p, 1.0)

    def airtime(self, size_bytes: int) -> int:
        return int(math.ceil(size_bytes * 8 / self.bitrate * 1e6))

    def queue_load(self, node: int, now: int) -> float:
        backlog = max(self.busy_until[node] - now, 0)
        return min(backlog / self.max_backlog_us, 1.0)

    # samples ----------------------------------------------------------------
    def _record(self, a: int, b: int, t_us: int, delivered: bool) -> None:
        key = (a, b) if a < b else (b, a)
        dq = self.samples[key]
        dq.append((t_us, delivered))
        c = self._counts.get(key)
        if c is None:
            c = self._counts[key] = [0, 0]
        c[0] += 1
        c[1] += delivered
        self._expire(dq, c, t_us - self.sample_horizon_us)
        if delivered:
            self.hop_delivered += 1
        else:
            self.hop_lost += 1

    @staticmethod
    def _expire(dq, c, cutoff: int) -> None:
        while dq and dq[0][0] < cutoff:
            _, ok = dq.popleft()
            c[0] -= 1
            c[1] -= ok

    def link_quality(self, a: int, b: int, window: float, now: int) -> float:
        """Fraction of delivered samples on (a, b) in the trailing window; 1.0 without samples."""
        key = (a, b) if a < b else (b, a)
        dq = self.samples.get(key)
        if not dq:
            return 1.0
        cutoff = now - to_us(window)
        if to_us(window) == self.sample_horizon_us:
            c = self._counts[key]
            self._expire(dq, c, cutoff)
            return c[1] / c[0] if c[0] else 1.0
        total = ok = 0
        for t, delivered in dq:
            if t >= cutoff:
                total += 1
                ok += delivered
        return ok / total if total else 1.0

    # transmission -------------------------------------------------------------
    def _start(self, node: int, now: int, size: int) -> int | None:
        start = max(now, self.busy_until[node])
        if start - now > self.max_backlog_us:
            return None
        return start

    def _account(self, pkt: Packet) -> None:
        if pkt.kind is PacketKind.DATA:
            self.metrics.data_bytes += pkt.payload_size
            self.metrics.data_tx += 1
        else:
            self.metrics.control_tx[pkt.kind.value] += 1
            self.metrics.control_bytes[pkt.kind.value] += pkt.payload_size

    def transmit(self, pkt: Packet, frm: int, to: int, now: int) -> bool:
        """Unicast one hop. Returns True if an arrival was scheduled.

        On failure (loss on every attempt or out of range) the failure handler
        fires once the last attempt has timed out.
        """
        start = self._start(frm, now, pkt.payload_size)
        if start is None:
            self.metrics.queue_overflow(pkt)
            return False
        self._account(pkt)
        air = self.airtime(pkt.payload_size)
        attempts = 1 + self.sc.max_retries
        t = start
        for _ in range(attempts):
            d = self.distance(frm, to, t)
            ok = d <= self.range and self.rng.random() >= self.loss_probability(d)
            self._record(frm, to, t, ok)
            if ok:
                end = t + air
                self.busy_until[frm] = end
                pkt.hops.append(Hop(air, t - start, start - pkt.custody_since, self.proc_us))
                self.queue.schedule(end + self.proc_us, EventKind.PACKET_ARRIVAL, (pkt, frm, to))
                return True
            t += air + self.retry_us
        self.busy_until[frm] = t
        self.queue.schedule(t, EventKind.TIMER_FIRE, (self.on_failure, (frm, pkt, to)))
        return False

    def broadcast(self, pkt: Packet, frm: int, now: int) -> int:
        """One airtime, independent loss per in-range neighbour. Returns receiver count."""
        start = self._start(frm, now, pkt.payload_size)
        if start is None:
            self.metrics.queue_overflow(pkt)
            return 0
        self._account(pkt)
        air = self.airtime(pkt.payload_size)
        end = start + air
        self.busy_until[frm] = end
        arrive = end + self.proc_us
        received = 0
        for other, d in self.neighbors(frm, start):
            ok = self.rng.random() >= self.loss_probability(d)
            self._record(frm, other, start, ok)
            if ok:
                received += 1
                self.queue.schedule(arrive, EventKind.PACKET_ARRIVAL, (pkt, frm, other))
        return received


def transmit(link: LinkLayer, pkt: Packet, frm: int, to: int, now: int) -> bool:
    return link.transmit(pkt, frm, to, now)


def link_quality(link: LinkLayer, a: int, b: int, window: float, now: int) -> float:
    return link.link_quality(a, b, window, now)
