"""Proactive link-state routing: Hello, MPR selection, TC flooding, route tables."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from .events import to_us
from .graph import hop_shortest_paths
from .link import HEADER_BYTES, BROADCAST, Packet, PacketKind


def select_mprs(one_hop, two_hop, coverage: int = 1) -> set:
    """Greedy multipoint-relay cover of the strict 2-hop neighbourhood.

    Every 2-hop node ends up adjacent to ``coverage`` relays (or to all of its
    coverers if it has fewer). Neighbours that are needed no matter what are
    taken first; then the neighbour serving most under-covered 2-hop nodes is
    added, lowest id on ties.
    """
    one_hop = set(one_hop)
    cover = {n: set(two_hop.get(n, ())) - one_hop for n in one_hop}
    coverers: dict = {}
    for n, c in cover.items():
        for t in c:
            coverers.setdefault(t, []).append(n)
    need = {t: min(coverage, len(cs)) for t, cs in coverers.items()}
    mprs = set()
    for t, cs in coverers.items():
        if len(cs) <= coverage:
            mprs.update(cs)
    have = {t: sum(1 for n in cs if n in mprs) for t, cs in coverers.items()}
    short = {t for t in coverers if have[t] < need[t]}
    while short:
        best = min((n for n in one_hop if n not in mprs),
                   key=lambda n: (-len(cover[n] & short), n))
        mprs.add(best)
        for t in cover[best]:
            have[t] += 1
            if have[t] >= need[t]:
                short.discard(t)
    return mprs


@dataclass
class NeighborTable:
    one_hop: dict = field(default_factory=dict)  # id -> last heard (us)
    two_hop: dict = field(default_factory=dict)  # 1-hop id -> set of its neighbours
    mpr_set: set = field(default_factory=set)
    mpr_selectors: dict = field(default_factory=dict)  # id -> last heard (us)

    def purge(self, now: int, hold_us: int) -> bool:
        stale = [n for n, t in self.one_hop.items() if now - t > hold_us]
        for n in stale:
            del self.one_hop[n]
            self.two_hop.pop(n, None)
            self.mpr_selectors.pop(n, None)
        self.mpr_set &= set(self.one_hop)
        return bool(stale)


class TopologyEntry(NamedTuple):
    seq: int
    expiry: int


@dataclass
class TopologyTable:
    entries: dict = field(default_factory=dict)  # (advertiser, neighbour) -> TopologyEntry
    latest_seq: dict = field(default_factory=dict)
    advertised: dict = field(default_factory=dict)  # advertiser -> its current neighbours
    expiry: dict = field(default_factory=dict)  # advertiser -> expiry of its entries

    def install(self, advertiser: int, neighbours, seq: int, expiry: int) -> bool:
        if seq < self.latest_seq.get(advertiser, -1):
            return False
        self.latest_seq[advertiser] = seq
        for nb in self.advertised.pop(advertiser, ()):
            del self.entries[(advertiser, nb)]
        self.advertised[advertiser] = set(neighbours)
        self.expiry[advertiser] = expiry
        for nb in neighbours:
            self.entries[(advertiser, nb)] = TopologyEntry(seq, expiry)
        return True

    def purge(self, now: int) -> bool:
        stale = [a for a, t in self.expiry.items() if t < now]
        for a in stale:
            del self.expiry[a]
            for nb in self.advertised.pop(a, ()):
                del self.entries[(a, nb)]
        return bool(stale)

    def edges(self):
        return list(self.entries)


class RouteEntry(NamedTuple):
    next_hop: int
    cost: int
    path: tuple


def routing_graph(self_id: int, neighbors: NeighborTable, topo: TopologyTable) -> dict:
    adj: dict = defaultdict(set)
    own = adj[self_id]
    for n in neighbors.one_hop:
        own.add(n)
        an = adj[n]
        an.add(self_id)
        for m in neighbors.two_hop.get(n, ()):
            an.add(m)
            adj[m].add(n)
    for a, b in topo.entries:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def compute_routes(self_id: int, neighbors: NeighborTable, topo: TopologyTable) -> dict:
    """Hop-count routes over 1-hop links, 2-hop links and TC topology."""
    adj = routing_graph(self_id, neighbors, topo)
    paths = hop_shortest_paths(self_id, adj)
    return {d: RouteEntry(p[1], len(p) - 1, tuple(p)) for d, p in paths.items()}


@dataclass(frozen=True)
class HelloMsg:
    sender: int
    neighbors: tuple
    mprs: tuple
    extra: object = None


@dataclass(frozen=True)
class TcMsg:
    originator: int
    seq: int
    selectors: tuple
    extra: object = None


class OlsrCore:
    """Per-node OLSR state machine, shared by the pure OLSR and HIROL agents."""

    def __init__(self, node: int, ctx, tc_forward_ok: Optional[Callable[[TcMsg], bool]] = None):
        self.node = node
        self.ctx = ctx
        sc = ctx.sc
        self.hello_hold = to_us(3 * sc.hello_interval)
        self.tc_hold = to_us(3 * sc.tc_interval)
        self.nt = NeighborTable()
        self.topo = TopologyTable()
        self.tc_seq = 0
        self.seen: dict = {}  # (originator, seq) -> retransmitted
        self.tc_forward_ok = tc_forward_ok
        self.mpr_coverage = 1
        self._routes = None
        self.hello_extra: Callable[[], object] = lambda: None
        self.hello_extra_bytes = 0
        self.on_hello: Callable[[HelloMsg, int], None] = lambda msg, frm: None
        self.on_tc: Callable[[TcMsg], None] = lambda msg: None
        self.tc_extra: Callable[[], object] = lambda: None

    # tables -----------------------------------------------------------------
    def refresh(self) -> None:
        now = self.ctx.now
        changed = self.nt.purge(now, self.hello_hold)
        changed |= self.topo.purge(now)
        if changed:
            self._routes = None

    def routes(self) -> dict:
        self.refresh()
        if self._routes is None:
            self._routes = compute_routes(self.node, self.nt, self.topo)
        return self._routes

    def link_lost(self, nbr: int) -> None:
        """Link-layer notification: forget ``nbr`` until its next Hello."""
        nt = self.nt
        if nt.one_hop.pop(nbr, None) is not None:
            self._routes = None
        nt.two_hop.pop(nbr, None)
        nt.mpr_selectors.pop(nbr, None)
        nt.mpr_set.discard(nbr)

    def graph(self) -> dict:
        self.refresh()
        return routing_graph(self.node, self.nt, self.topo)

    # hello --------------------------------------------------------------------
    def hello_tick(self) -> Packet:
        self.refresh()
        self.nt.mpr_set = select_mprs(self.nt.one_hop, self.nt.two_hop, self.mpr_coverage)
        nbrs = tuple(sorted(self.nt.one_hop))
        mprs = tuple(sorted(self.nt.mpr_set))
        msg = HelloMsg(self.node, nbrs, mprs, self.hello_extra())
        size = HEADER_BYTES + 8 + 4 * (len(nbrs) + len(mprs)) + self.hello_extra_bytes
        pkt = Packet(PacketKind.HELLO, self.node, BROADCAST, size, self.ctx.now, payload=msg)
        self.ctx.link.broadcast(pkt, self.node, self.ctx.now)
        return pkt

    def process_hello(self, msg: HelloMsg, frm: int) -> None:
        now = self.ctx.now
        nt = self.nt
        if frm not in nt.one_hop:
            self._routes = None
        nt.one_hop[frm] = now
        two = set(msg.neighbors) - {self.node}
        if nt.two_hop.get(frm) != two:
            nt.two_hop[frm] = two
            self._routes = None
        if self.node in msg.mprs:
            nt.mpr_selectors[frm] = now
        else:
            nt.mpr_selectors.pop(frm, None)
        self.on_hello(msg, frm)

    # tc -----------------------------------------------------------------------
    def tc_tick(self) -> Optional[Packet]:
        self.refresh()
        if not self.nt.mpr_selectors:
            return None
        self.tc_seq += 1
        sel = tuple(sorted(self.nt.mpr_selectors))
        msg = TcMsg(self.node, self.tc_seq, sel, self.tc_extra())
        self.seen[(self.node, self.tc_seq)] = True
        pkt = Packet(PacketKind.TC, self.node, BROADCAST, HEADER_BYTES + 12 + 4 * len(sel),
                     self.ctx.now, payload=msg)
        self.ctx.link.broadcast(pkt, self.node, self.ctx.now)
        return pkt

    def process_tc(self, pkt: Packet, frm: int) -> bool:
        """Install topology from a TC; returns True if this node re-forwarded it."""
        msg: TcMsg = pkt.payload
        if msg.originator == self.node:
            return False
        key = (msg.originator, msg.seq)
        first = key not in self.seen
        if first:
            self.seen[key] = False
            if self.topo.install(msg.originator, msg.selectors, msg.seq, self.ctx.now + self.tc_hold):
                self._routes = None
            self.on_tc(msg)
        if self.seen[key]:
            return False
        self.refresh()
        if frm not in self.nt.mpr_selectors:
            return False
        if self.tc_forward_ok is not None and not self.tc_forward_ok(msg):
            return False
        self.seen[key] = True
        fwd = Packet(PacketKind.TC, pkt.src, BROADCAST, pkt.payload_size, self.ctx.now, payload=msg)
        self.ctx.link.broadcast(fwd, self.node, self.ctx.now)
        return True


class OlsrAgent:
    """Pure OLSR node: hop-by-hop forwarding from the proactive table."""

    protocol = "olsr"

    def __init__(self, node: int, ctx):
        self.node = node
        self.ctx = ctx
        self.core = OlsrCore(node, ctx)
        self.tc_forwards = 0

    def hello_tick(self):
        self.core.hello_tick()

    def tc_tick(self):
        self.core.tc_tick()

    def send(self, pkt: Packet) -> None:
        self._forward(pkt)

    def _forward(self, pkt: Packet) -> None:
        if pkt.hop_index >= self.ctx.sc.node_count:
            self.ctx.metrics.drop(pkt, "ttl")
            return
        route = self.core.routes().get(pkt.dst)
        if route is None:
            self.ctx.metrics.drop(pkt, "no_route")
            return
        pkt.hop_index += 1
        self.ctx.link.transmit(pkt, self.node, route.next_hop, self.ctx.now)

    def receive(self, pkt: Packet, frm: int) -> None:
        kind = pkt.kind
        if kind is PacketKind.DATA:
            pkt.custody_since = self.ctx.now
            if pkt.dst == self.node:
                self.ctx.metrics.on_deliver(pkt, self.ctx.now)
            else:
                self._forward(pkt)
        elif kind is PacketKind.HELLO:
            self.core.process_hello(pkt.payload, frm)
        elif kind is PacketKind.TC:
            if self.core.process_tc(pkt, frm):
                self.tc_forwards += 1

    def on_tx_failure(self, pkt: Packet, to: int) -> None:
        if self.ctx.sc.link_notification:
            self.core.link_lost(to)
        self.ctx.metrics.drop(pkt, "link_failure")
