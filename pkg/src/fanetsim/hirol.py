"""Hybrid zone-switched routing with learned link filtering and bee-colony route choice.

A node routes proactively (from its link-state view) when the destination
sits in its own spatial zone and reactively (source-route discovery)
otherwise. Candidate routes are screened by the link classifier, and when
several survive, the colony optimiser picks among the routes their edges
span.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

from . import abc as bees
from .ann import AlwaysStable, LinkContext, extract_features
from .dsr import DsrAgent, PendingDiscovery, RerrMsg
from .events import to_us
from .graph import contains_edge, hop_shortest_paths, path_edges
from .link import HEADER_BYTES, Packet, PacketKind
from .olsr import OlsrCore, TcMsg, select_mprs


class Strategy(str, enum.Enum):
    PROACTIVE = "proactive"
    REACTIVE = "reactive"


@dataclass(frozen=True)
class ZoneGrid:
    cell: tuple = (200.0, 200.0, 200.0)
    arena: tuple = (800.0, 800.0, 200.0)

    @property
    def shape(self) -> tuple:
        return tuple(max(1, math.ceil(a / c)) for a, c in zip(self.arena, self.cell))


def zone_of(p, grid: ZoneGrid) -> tuple:
    """Grid cell of ``p``; positions outside the arena clamp to the boundary cell."""
    return tuple(min(max(int(math.floor(x / c)), 0), n - 1)
                 for x, c, n in zip(p, grid.cell, grid.shape))


def select_strategy(src_zone, dst_zone) -> Strategy:
    return Strategy.PROACTIVE if tuple(src_zone) == tuple(dst_zone) else Strategy.REACTIVE


@dataclass
class TableEntry:
    route: tuple
    strategy: Strategy
    installed_at: int
    last_validated: int
    fallback: bool = False


class HybridRoutingTable:
    def __init__(self):
        self.entries: dict[int, TableEntry] = {}

    def install(self, dst: int, route, strategy: Strategy, now: int, fallback: bool = False) -> TableEntry:
        route = tuple(route)
        if len(set(route)) != len(route) or len(route) < 2 or route[-1] != dst:
            raise ValueError(f"route {route} is not a simple path to {dst}")
        e = self.entries[dst] = TableEntry(route, strategy, now, now, fallback)
        return e

    def get(self, dst: int) -> Optional[TableEntry]:
        return self.entries.get(dst)

    def remove(self, dst: int) -> None:
        self.entries.pop(dst, None)

    def purge_edge(self, u: int, v: int) -> list[int]:
        hit = [d for d, e in self.entries.items() if contains_edge(e.route, u, v)]
        for d in hit:
            del self.entries[d]
        return hit


@dataclass(frozen=True)
class NodeInfo:
    """Self-reported state: position, velocity, queue load, and the quality of the
    link the report arrived over (RREQ/RREP hop records)."""

    node: int
    pos: tuple
    vel: tuple
    t_us: int
    load: float
    q_in: float = 1.0


@dataclass(frozen=True)
class HelloExtra:
    info: NodeInfo
    quality: tuple  # ((neighbour, delivery fraction), ...)


NODE_INFO_BYTES = 16


class Choice(NamedTuple):
    route: tuple
    survivors: tuple
    fallback: bool
    used_abc: bool


def choose_route(candidates: Sequence, link_score: Callable[[int, int], float],
                 link_quality: Callable[[int, int], float], hop_delay: Callable[[int, int], float], *,
                 threshold: float, node_count: int, abc_params, rng, use_abc: bool = True) -> Optional[Choice]:
    """Filter candidates by their weakest link's score, then pick among the survivors.

    If nothing survives, the candidate with the best weakest-link score is
    returned instead (earliest wins ties). With several survivors the colony
    optimiser searches the union of their edges; without ``use_abc`` the first
    survivor is taken.
    """
    candidates = [tuple(c) for c in candidates]
    if not candidates:
        return None
    weakest = [min(link_score(u, v) for u, v in path_edges(r)) for r in candidates]
    survivors = [r for r, w in zip(candidates, weakest) if w >= threshold]
    if not survivors:
        best = max(range(len(candidates)), key=lambda i: (weakest[i], -i))
        return Choice(candidates[best], (), True, False)
    if len(survivors) == 1 or not use_abc:
        return Choice(survivors[0], tuple(survivors), False, False)
    edges = []
    seen = set()
    for r in survivors:
        for u, v in path_edges(r):
            key = (u, v) if u < v else (v, u)
            if key not in seen:
                seen.add(key)
                edges.append(key)
    snap = bees.Snapshot(
        src=survivors[0][0], dst=survivors[0][-1], edges=tuple(edges),
        quality=tuple(link_quality(u, v) for u, v in edges),
        hop_delay=tuple(hop_delay(u, v) for u, v in edges),
        node_count=node_count)
    best = bees.optimize(snap, abc_params, rng)
    return Choice(best.decoded_route, tuple(survivors), False, True)


class HirolAgent(DsrAgent):
    protocol = "hirol"

    def __init__(self, node: int, ctx):
        super().__init__(node, ctx)
        sc = ctx.sc
        self.hp = sc.hirol_params
        self.grid = ZoneGrid(tuple(self.hp.zone_cell), tuple(sc.arena))
        self.olsr = OlsrCore(node, ctx, tc_forward_ok=self._tc_in_zone)
        self.olsr.hello_extra = self._hello_extra
        self.olsr.hello_extra_bytes = NODE_INFO_BYTES
        self.olsr.on_hello = self._on_hello
        self.olsr.tc_extra = lambda: self.own_info()
        self.olsr.on_tc = self._on_tc
        self.table = HybridRoutingTable()
        self.known: dict[int, NodeInfo] = {}
        self.remote_q: dict[tuple, float] = {}
        self.repair_wait: set = set()
        self.last_discovery: dict[int, int] = {}
        self.strategy_log: list = []
        self.abc_calls = 0
        self.fallbacks = 0
        self._pending_samples: dict[int, list] = {}
        self._score_cache: dict = {}
        self._score_time = -1
        ann = sc.ann_params
        self.threshold = ann.threshold
        self.lookahead_us = to_us(ann.lookahead)
        self.online = ann.online and self.hp.use_ann
        self.position_ttl_us = to_us(self.hp.position_ttl)
        data_air = ctx.link.data_air_us / 1e6
        self._air = data_air
        self._retry = sc.retry_timeout
        self._proc = sc.processing_delay

    @property
    def classifier(self):
        return self.ctx.classifier if self.hp.use_ann else AlwaysStable()

    # knowledge ------------------------------------------------------------------
    def own_info(self, q_in: float = 1.0) -> NodeInfo:
        now = self.ctx.now
        link = self.ctx.link
        return NodeInfo(self.node, tuple(link.position(self.node, now)), tuple(link.velocity(self.node, now)),
                        now, link.queue_load(self.node, now), q_in)

    def learn(self, info: NodeInfo) -> None:
        if info.node == self.node:
            return
        cur = self.known.get(info.node)
        if cur is None or info.t_us >= cur.t_us:
            self.known[info.node] = info

    def estimate(self, node: int):
        """(position, velocity) of ``node`` now, dead-reckoned from its last report."""
        now = self.ctx.now
        if node == self.node:
            return self.ctx.link.position(node, now), self.ctx.link.velocity(node, now)
        info = self.known.get(node)
        if info is None or now - info.t_us > self.position_ttl_us:
            return None
        dt = (now - info.t_us) / 1e6
        pos = tuple(min(max(p + v * dt, 0.0), a) for p, v, a in zip(info.pos, info.vel, self.ctx.sc.arena))
        return pos, info.vel

    def _hello_extra(self) -> HelloExtra:
        now = self.ctx.now
        window = self.ctx.sc.ann_params.quality_window
        q = tuple((n, self.ctx.link.link_quality(self.node, n, window, now)) for n in sorted(self.olsr.nt.one_hop))
        return HelloExtra(self.own_info(), q)

    def _on_hello(self, msg, frm: int) -> None:
        extra: HelloExtra = msg.extra
        if extra is None:
            return
        self.learn(extra.info)
        for n, q in extra.quality:
            self.remote_q[(frm, n) if frm < n else (n, frm)] = q

    def _on_tc(self, msg: TcMsg) -> None:
        if msg.extra is not None:
            self.learn(msg.extra)

    def _tc_in_zone(self, msg: TcMsg) -> bool:
        if msg.extra is None:
            return True
        return zone_of(msg.extra.pos, self.grid) == self.my_zone()

    def my_zone(self) -> tuple:
        return zone_of(self.ctx.link.position(self.node, self.ctx.now), self.grid)

    def hop_info(self, frm: int) -> NodeInfo:
        q = 1.0
        if frm >= 0:
            q = self.ctx.link.link_quality(frm, self.node, self.ctx.sc.ann_params.quality_window, self.ctx.now)
        return self.own_info(q)

    def rreq_size(self, record_len: int) -> int:
        return super().rreq_size(record_len) + NODE_INFO_BYTES * record_len

    def route_learned(self, route: tuple, info: tuple) -> None:
        prev = None
        for item in info:
            if item is None:
                continue
            self.learn(item)
            if prev is not None:
                a, b = prev, item.node
                self.remote_q[(a, b) if a < b else (b, a)] = item.q_in
            prev = item.node
        entry = self.table.get(route[-1])
        if entry is not None and entry.strategy is Strategy.REACTIVE:
            self.table.remove(route[-1])

    # link assessment --------------------------------------------------------------
    def link_features(self, u: int, v: int):
        a = self.estimate(u)
        b = self.estimate(v)
        if a is None or b is None:
            return None
        sc = self.ctx.sc
        return extract_features(LinkContext(a[0], b[0], a[1], b[1], sc.radio_range,
                                            self.link_q(u, v), self.load_of(v), sc.ann_params.max_speed))

    def link_q(self, u: int, v: int) -> float:
        if self.node in (u, v):
            other = v if u == self.node else u
            return self.ctx.link.link_quality(self.node, other, self.ctx.sc.ann_params.quality_window, self.ctx.now)
        return self.remote_q.get((u, v) if u < v else (v, u), 1.0)

    def load_of(self, node: int) -> float:
        if node == self.node:
            return self.ctx.link.queue_load(node, self.ctx.now)
        info = self.known.get(node)
        return info.load if info is not None else 0.0

    def link_score(self, u: int, v: int) -> float:
        now = self.ctx.now
        if now != self._score_time:
            self._score_time = now
            self._score_cache = {}
        key = (u, v)
        s = self._score_cache.get(key)
        if s is None:
            f = self.link_features(u, v)
            # no position knowledge: neither evidence for nor against the link
            s = self.threshold if f is None else self.classifier.score(f)
            self._score_cache[key] = s
        return s

    def hop_delay(self, u: int, v: int) -> float:
        q = max(self.link_q(u, v), 0.05)
        backlog = self.load_of(u) * self.ctx.sc.queue_capacity * self._air
        return self._air + self._proc + backlog + (1.0 - q) / q * (self._air + self._retry)

    # route resolution ---------------------------------------------------------------
    def strategy_for(self, dst: int) -> tuple:
        mine = self.my_zone()
        est = self.estimate(dst)
        if est is None:
            return Strategy.REACTIVE, mine, None
        theirs = zone_of(est[0], self.grid)
        return select_strategy(mine, theirs), mine, theirs

    def proactive_candidates(self, dst: int) -> list[tuple]:
        adj = self.olsr.graph()
        primary = hop_shortest_paths(self.node, adj).get(dst)
        if primary is None:
            return []
        out = [tuple(primary)]
        alts = set()
        for a, b in path_edges(primary):
            cut = {n: set(nb) for n, nb in adj.items()}
            cut[a].discard(b)
            cut[b].discard(a)
            p = hop_shortest_paths(self.node, cut).get(dst)
            if p is not None:
                alts.add(tuple(p))
        out += sorted(alts, key=lambda r: (len(r), r))[: self.hp.proactive_alternates]
        return out

    def reactive_candidates(self, dst: int) -> list[tuple]:
        nbrs = self.olsr.nt.one_hop
        return [r for r in self.cache.fresh(dst, self.ctx.now) if r[1] in nbrs]

    def resolve_route(self, dst: int) -> Optional[TableEntry]:
        self.olsr.refresh()
        strategy, mine, theirs = self.strategy_for(dst)
        if strategy is Strategy.PROACTIVE:
            cands = self.proactive_candidates(dst)
        else:
            cands = self.reactive_candidates(dst)
        self.strategy_log.append((self.ctx.now, dst, mine, theirs, strategy))
        choice = choose_route(cands, self.link_score, self.link_q, self.hop_delay,
                              threshold=self.threshold, node_count=self.ctx.sc.node_count,
                              abc_params=self.ctx.sc.abc_params, rng=self.ctx.rngs["abc"],
                              use_abc=self.hp.use_abc)
        if choice is None:
            return None
        self.abc_calls += choice.used_abc
        self.fallbacks += choice.fallback
        return self.table.install(dst, choice.route, strategy, self.ctx.now, choice.fallback)

    def route_for(self, dst: int) -> Optional[tuple]:
        if dst in self.repair_wait:
            return None
        now = self.ctx.now
        entry = self.table.get(dst)
        if entry is not None:
            self.olsr.refresh()
            if entry.route[1] not in self.olsr.nt.one_hop:
                self.table.remove(dst)
                entry = None
            elif now - entry.last_validated >= to_us(self.hp.validate_interval):
                weakest = min(self.link_score(u, v) for u, v in path_edges(entry.route))
                if weakest < self.threshold or entry.fallback:
                    self.table.remove(dst)
                    entry = None
                else:
                    entry.last_validated = now
        if entry is None:
            entry = self.resolve_route(dst)
            if entry is None:
                return None
        if entry.fallback and entry.strategy is Strategy.REACTIVE:
            self._background_discovery(dst)
        return entry.route

    def _background_discovery(self, dst: int) -> None:
        last = self.last_discovery.get(dst)
        if last is None or self.ctx.now - last >= to_us(self.hp.rediscovery_interval):
            self.initiate_route_discovery(dst)

    def initiate_route_discovery(self, dst: int):
        # cached routes were already weighed by resolve_route, so rediscover regardless
        if dst in self.pending:
            return None
        self.last_discovery[dst] = self.ctx.now
        self.request_id += 1
        self.pending[dst] = PendingDiscovery(dst, self.request_id, self.ctx.now)
        return self._send_rreq(dst, self.request_id, 0)

    def reply_limit(self) -> int:
        return self.hp.reply_limit

    def should_forward_rreq(self, pkt: Packet, frm: int) -> bool:
        relays = pkt.payload.relays
        return relays is None or self.node in relays

    def rreq_relays(self, frm: Optional[int]) -> Optional[frozenset]:
        """Neighbours that must relay this node's RREQ transmission.

        Dominant pruning: cover the current 2-hop set minus what ``frm``
        already reached, taking ANN-stable neighbours first.
        """
        if not self.hp.relay_pruning:
            return None
        self.olsr.refresh()
        nt = self.olsr.nt
        reached = {frm} | nt.two_hop.get(frm, set()) if frm is not None else set()
        cands = set(nt.one_hop) - reached
        direct = reached | set(nt.one_hop) | {self.node}
        two = {n: nt.two_hop.get(n, set()) - direct for n in cands}
        stable = {n for n in cands if self.link_score(self.node, n) >= self.threshold}
        k = self.hp.relay_coverage
        relays = select_mprs(stable, two, k)
        have: dict = {}
        for n in relays:
            for t in two[n]:
                have[t] = have.get(t, 0) + 1
        left = {n: {t for t in two[n] if have.get(t, 0) < k} for n in cands - relays}
        return frozenset(relays | select_mprs(set(left), left, k))

    # data path ------------------------------------------------------------------------
    def send(self, pkt: Packet) -> None:
        route = self.route_for(pkt.dst)
        if route is not None:
            self.send_on_route(pkt, route)
            return
        self.enqueue(pkt)
        if pkt.dst not in self.repair_wait:
            self.initiate_route_discovery(pkt.dst)

    def enqueue(self, pkt: Packet) -> None:
        super().enqueue(pkt)
        self.ctx.timer(to_us(self.hp.buffer_timeout), self._expire, pkt)

    def _expire(self, pkt: Packet) -> None:
        try:
            self.buffer.remove(pkt)
        except ValueError:
            return
        self.ctx.metrics.drop(pkt, "buffer_timeout")

    def forward_source_routed(self, pkt: Packet) -> None:
        nxt = pkt.route_record[pkt.hop_index + 1]
        pkt.hop_index += 1
        ok = self.ctx.link.transmit(pkt, self.node, nxt, self.ctx.now)
        if ok and self.online and pkt.kind is PacketKind.DATA:
            self._observe(nxt, True)

    # online adaptation: a feature sample taken when a link is used is labelled
    # stable once the link is seen working a full lookahead later, and unstable
    # if it fails within the lookahead
    def _observe(self, nxt: int, delivered: bool) -> None:
        now = self.ctx.now
        clf = self.classifier
        pending = self._pending_samples.setdefault(nxt, [])
        if delivered:
            keep = []
            for t, f in pending:
                if now - t >= self.lookahead_us:
                    if clf.score(f) < self.threshold:
                        clf.adapt(f, 1.0)
                elif now - t < 2 * self.lookahead_us:
                    keep.append((t, f))
            pending[:] = keep
            if not pending or now - pending[-1][0] >= self.lookahead_us // 4:
                f = self.link_features(self.node, nxt)
                if f is not None:
                    pending.append((now, f))
        else:
            for t, f in pending:
                if now - t <= self.lookahead_us and clf.score(f) >= self.threshold:
                    clf.adapt(f, 0.0)
            pending.clear()

    # maintenance ------------------------------------------------------------------------
    def on_tx_failure(self, pkt: Packet, to: int) -> None:
        if self.ctx.sc.link_notification:
            self.olsr.link_lost(to)
        self.cache.purge_edge(self.node, to)
        self.table.purge_edge(self.node, to)
        if pkt.kind is not PacketKind.DATA:
            return
        if self.online:
            self._observe(to, False)
        self.ctx.metrics.drop(pkt, "link_failure")
        if pkt.src == self.node:
            self.handle_link_break(pkt.dst)
        else:
            self.send_rerr(pkt, self.node, to)
            self._notify_destination(pkt, to)

    def _notify_destination(self, pkt: Packet, to: int) -> None:
        """Tell the destination about the break when a link-state path to it avoids the broken link."""
        path = self.olsr.routes().get(pkt.dst)
        if path is None or contains_edge(path.path, self.node, to):
            return
        err = Packet(PacketKind.RERR, self.node, pkt.dst, HEADER_BYTES + 12, self.ctx.now,
                     route_record=list(path.path), payload=RerrMsg(self.node, to, self.node, pkt.src))
        self.rerr_sent += 1
        DsrAgent.forward_source_routed(self, err)

    def handle_rerr(self, pkt: Packet) -> None:
        msg: RerrMsg = pkt.payload
        self.table.purge_edge(msg.u, msg.v)
        super().handle_rerr(pkt)

    def after_route_error(self, msg: RerrMsg) -> None:
        self.table.purge_edge(msg.u, msg.v)
        self.handle_link_break(msg.flow_dst)

    def handle_link_break(self, dst: int) -> None:
        """Switch to a remaining candidate at once; if none is left, rediscover after a backoff."""
        self.table.remove(dst)
        if dst in self.repair_wait:
            return
        if self.resolve_route(dst) is not None:
            self.flush_buffer(dst)
            return
        self.repair_wait.add(dst)
        self.ctx.timer(to_us(self.hp.repair_backoff), self._repair, dst)

    def _repair(self, dst: int) -> None:
        self.repair_wait.discard(dst)
        if not any(p.dst == dst for p in self.buffer):
            return
        if self.route_for(dst) is not None:
            self.flush_buffer(dst)
        else:
            self.initiate_route_discovery(dst)

    # dispatch -------------------------------------------------------------------------------
    def receive(self, pkt: Packet, frm: int) -> None:
        # any frame heard from a node is evidence of the link
        if pkt.kind is not PacketKind.HELLO:
            if frm not in self.olsr.nt.one_hop:
                self.olsr._routes = None
            self.olsr.nt.one_hop[frm] = self.ctx.now
        super().receive(pkt, frm)

    def receive_other(self, pkt: Packet, frm: int) -> None:
        if pkt.kind is PacketKind.HELLO:
            self.olsr.process_hello(pkt.payload, frm)
        elif pkt.kind is PacketKind.TC:
            self.olsr.process_tc(pkt, frm)

    def hello_tick(self):
        self.olsr.hello_tick()

    def tc_tick(self):
        self.olsr.tc_tick()
