"""Reactive source routing: RREQ flooding, RREP, route cache and RERR."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .events import to_us
from .graph import contains_edge
from .link import BROADCAST, HEADER_BYTES, Packet, PacketKind


class RouteCache:
    """Source routes owned by one node, at most ``capacity`` per destination."""

    def __init__(self, owner: int, capacity: int = 3, ttl_us: int = 30_000_000):
        self.owner = owner
        self.capacity = capacity
        self.ttl_us = ttl_us
        self.entries: dict[int, list[tuple[tuple, int]]] = {}

    def add(self, route, now: int) -> None:
        route = tuple(route)
        if route[0] != self.owner or len(set(route)) != len(route) or len(route) < 2:
            raise ValueError(f"route {route} is not a simple path from {self.owner}")
        lst = self.entries.setdefault(route[-1], [])
        lst[:] = [(r, t) for r, t in lst if r != route]
        lst.append((route, now))
        if len(lst) > self.capacity:
            lst.sort(key=lambda e: e[1])
            del lst[: len(lst) - self.capacity]

    def fresh(self, dst: int, now: int) -> list[tuple]:
        lst = self.entries.get(dst, [])
        lst[:] = [(r, t) for r, t in lst if now - t <= self.ttl_us]
        return [r for r, _ in sorted(lst, key=lambda e: (len(e[0]), -e[1]))]

    def lookup(self, dst: int, now: int) -> Optional[tuple]:
        routes = self.fresh(dst, now)
        return routes[0] if routes else None

    def purge_edge(self, u: int, v: int) -> int:
        removed = 0
        for dst, lst in self.entries.items():
            keep = [(r, t) for r, t in lst if not contains_edge(r, u, v)]
            removed += len(lst) - len(keep)
            lst[:] = keep
        return removed

    def remove(self, route) -> None:
        route = tuple(route)
        lst = self.entries.get(route[-1], [])
        lst[:] = [(r, t) for r, t in lst if r != route]

    def all_routes(self) -> list[tuple]:
        return [r for lst in self.entries.values() for r, _ in lst]


def cache_lookup(cache: RouteCache, dst: int, now: int) -> Optional[tuple]:
    return cache.lookup(dst, now)


@dataclass
class PendingDiscovery:
    destination: int
    request_id: int
    issued_at: int
    retries: int = 0


@dataclass(frozen=True)
class RreqMsg:
    origin: int
    request_id: int
    target: int
    info: tuple = ()  # per-hop link context, used by HIROL
    relays: Optional[frozenset] = None  # designated relays; None means everyone relays


@dataclass(frozen=True)
class RrepMsg:
    route: tuple
    request_id: int
    info: tuple = ()


@dataclass(frozen=True)
class RerrMsg:
    u: int
    v: int
    origin: int  # node that detected the break
    flow_dst: int


class DsrAgent:
    protocol = "dsr"

    def __init__(self, node: int, ctx):
        self.node = node
        self.ctx = ctx
        sc = ctx.sc
        self.cache = RouteCache(node, sc.cache_routes, to_us(sc.cache_ttl))
        self.pending: dict[int, PendingDiscovery] = {}
        self.buffer: deque = deque()
        self.seen_rreq: set = set()
        self.replies: dict = {}
        self.request_id = 0
        self.rreq_sent = 0
        self.rreq_forwards = 0
        self.rrep_sent = 0
        self.rerr_sent = 0

    # hooks overridden by HIROL ---------------------------------------------------
    def reply_limit(self) -> int:
        return 1_000_000 if self.ctx.sc.reply_all else 1

    def should_forward_rreq(self, pkt: Packet, frm: int) -> bool:
        return True

    def rreq_relays(self, frm: Optional[int]) -> Optional[frozenset]:
        return None

    def hop_info(self, frm: int):
        return None

    def route_learned(self, route: tuple, info: tuple) -> None:
        pass

    def route_for(self, dst: int) -> Optional[tuple]:
        return self.cache.lookup(dst, self.ctx.now)

    def flush_buffer(self, dst: int) -> None:
        if not any(p.dst == dst for p in self.buffer):
            return
        route = self.route_for(dst)
        if route is None:
            return
        keep = deque()
        for pkt in self.buffer:
            if pkt.dst == dst:
                self.send_on_route(pkt, route)
            else:
                keep.append(pkt)
        self.buffer = keep

    # data -----------------------------------------------------------------------
    def send(self, pkt: Packet) -> None:
        route = self.route_for(pkt.dst)
        if route is not None:
            self.send_on_route(pkt, route)
        else:
            self.enqueue(pkt)
            self.initiate_route_discovery(pkt.dst)

    def enqueue(self, pkt: Packet) -> None:
        self.buffer.append(pkt)
        if len(self.buffer) > self.ctx.sc.send_buffer:
            self.ctx.metrics.drop(self.buffer.popleft(), "buffer_overflow")

    def send_on_route(self, pkt: Packet, route) -> None:
        pkt.route_record = list(route)
        pkt.hop_index = 0
        self.forward_source_routed(pkt)

    def forward_source_routed(self, pkt: Packet) -> None:
        nxt = pkt.route_record[pkt.hop_index + 1]
        pkt.hop_index += 1
        self.ctx.link.transmit(pkt, self.node, nxt, self.ctx.now)

    # discovery --------------------------------------------------------------------
    def initiate_route_discovery(self, dst: int) -> Optional[Packet]:
        if dst in self.pending:
            return None
        if self.cache.lookup(dst, self.ctx.now) is not None:
            return None
        self.request_id += 1
        self.pending[dst] = PendingDiscovery(dst, self.request_id, self.ctx.now)
        return self._send_rreq(dst, self.request_id, 0)

    def _send_rreq(self, dst: int, request_id: int, attempt: int) -> Packet:
        self.seen_rreq.add((self.node, request_id))
        info = (self.hop_info(-1),) if self.hop_info(-1) is not None else ()
        relays = self.rreq_relays(None)
        size = self.rreq_size(1) + (4 * len(relays) if relays is not None else 0)
        pkt = Packet(PacketKind.RREQ, self.node, BROADCAST, size, self.ctx.now,
                     route_record=[self.node], payload=RreqMsg(self.node, request_id, dst, info, relays))
        self.rreq_sent += 1
        self.ctx.link.broadcast(pkt, self.node, self.ctx.now)
        timeout = to_us(self.ctx.sc.discovery_timeout * (2 ** attempt))
        self.ctx.timer(timeout, self._discovery_timeout, dst, request_id)
        return pkt

    def rreq_size(self, record_len: int) -> int:
        return HEADER_BYTES + 8 + 4 * record_len

    def _discovery_timeout(self, dst: int, request_id: int) -> None:
        pd = self.pending.get(dst)
        if pd is None or pd.request_id != request_id:
            return
        if pd.retries >= self.ctx.sc.max_discovery_retries:
            del self.pending[dst]
            self.drop_buffered(dst, "discovery_failed")
            return
        pd.retries += 1
        self.request_id += 1
        pd.request_id = self.request_id
        self._send_rreq(dst, pd.request_id, pd.retries)

    def drop_buffered(self, dst: int, reason: str) -> None:
        keep = deque()
        for pkt in self.buffer:
            if pkt.dst == dst:
                self.ctx.metrics.drop(pkt, reason)
            else:
                keep.append(pkt)
        self.buffer = keep

    def handle_rreq(self, pkt: Packet, frm: int) -> str:
        """Returns 'drop', 'reply' or 'forward'."""
        msg: RreqMsg = pkt.payload
        key = (msg.origin, msg.request_id)
        record = pkt.route_record
        if self.node in record:
            return "drop"
        if self.node == msg.target:
            n = self.replies.get(key, 0)
            if n >= self.reply_limit():
                return "drop"
            self.replies[key] = n + 1
            info = msg.info + ((self.hop_info(frm),) if self.hop_info(frm) is not None else ())
            self._send_rrep(tuple(record) + (self.node,), msg.request_id, info)
            return "reply"
        if key in self.seen_rreq:
            return "drop"
        if len(record) + 1 > self.ctx.sc.node_count:
            return "drop"
        # a copy this node may not relay does not count as seen, so a later
        # copy from a node it relays for is still forwarded
        if not self.should_forward_rreq(pkt, frm):
            return "drop"
        self.seen_rreq.add(key)
        new_record = record + [self.node]
        info = msg.info + ((self.hop_info(frm),) if self.hop_info(frm) is not None else ())
        relays = self.rreq_relays(frm)
        size = self.rreq_size(len(new_record)) + (4 * len(relays) if relays is not None else 0)
        fwd = Packet(PacketKind.RREQ, pkt.src, BROADCAST, size, self.ctx.now,
                     route_record=new_record,
                     payload=RreqMsg(msg.origin, msg.request_id, msg.target, info, relays))
        self.rreq_forwards += 1
        self.ctx.link.broadcast(fwd, self.node, self.ctx.now)
        return "forward"

    def _send_rrep(self, route: tuple, request_id: int, info: tuple) -> None:
        back = list(reversed(route))
        pkt = Packet(PacketKind.RREP, self.node, route[0], HEADER_BYTES + 8 + 4 * len(route), self.ctx.now,
                     route_record=back, payload=RrepMsg(route, request_id, info))
        self.rrep_sent += 1
        self.forward_source_routed(pkt)

    def handle_rrep(self, pkt: Packet) -> None:
        msg: RrepMsg = pkt.payload
        if pkt.dst != self.node:
            self.forward_source_routed(pkt)
            return
        self.cache.add(msg.route, self.ctx.now)
        self.route_learned(msg.route, msg.info)
        self.pending.pop(msg.route[-1], None)
        self.flush_buffer(msg.route[-1])

    # maintenance ----------------------------------------------------------------------
    def send_rerr(self, pkt: Packet, u: int, v: int) -> None:
        """Report broken link (u, v) to the source of ``pkt`` along the traversed prefix."""
        prefix = pkt.route_record[: pkt.hop_index]
        if len(prefix) < 2:
            return
        back = list(reversed(prefix))
        err = Packet(PacketKind.RERR, self.node, back[-1], HEADER_BYTES + 12, self.ctx.now,
                     route_record=back, payload=RerrMsg(u, v, self.node, pkt.dst))
        self.rerr_sent += 1
        self.forward_source_routed(err)

    def handle_rerr(self, pkt: Packet) -> None:
        msg: RerrMsg = pkt.payload
        self.cache.purge_edge(msg.u, msg.v)
        if pkt.dst != self.node:
            self.forward_source_routed(pkt)
        else:
            self.after_route_error(msg)

    def after_route_error(self, msg: RerrMsg) -> None:
        if any(p.dst == msg.flow_dst for p in self.buffer):
            self.initiate_route_discovery(msg.flow_dst)

    def on_tx_failure(self, pkt: Packet, to: int) -> None:
        self.cache.purge_edge(self.node, to)
        if pkt.kind is PacketKind.DATA:
            self.ctx.metrics.drop(pkt, "link_failure")
            if pkt.src == self.node:
                self.after_route_error(RerrMsg(self.node, to, self.node, pkt.dst))
            else:
                self.send_rerr(pkt, self.node, to)

    # dispatch ---------------------------------------------------------------------------
    def receive(self, pkt: Packet, frm: int) -> None:
        kind = pkt.kind
        if kind is PacketKind.DATA:
            pkt.custody_since = self.ctx.now
            if pkt.dst == self.node:
                self.ctx.metrics.on_deliver(pkt, self.ctx.now)
            else:
                self.forward_source_routed(pkt)
        elif kind is PacketKind.RREQ:
            self.handle_rreq(pkt, frm)
        elif kind is PacketKind.RREP:
            self.handle_rrep(pkt)
        elif kind is PacketKind.RERR:
            self.handle_rerr(pkt)
        else:
            self.receive_other(pkt, frm)

    def receive_other(self, pkt: Packet, frm: int) -> None:
        pass

    def hello_tick(self):
        pass

    def tc_tick(self):
        pass
