"""Top-level run loop: wires mobility, radio, routing agents and traffic together."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .dsr import DsrAgent
from .events import EventKind, EventQueue, to_us
from .hirol import HirolAgent
from .link import LinkLayer, Packet, PacketKind
from .metrics import MetricsCollector, MetricsReport
from .mobility import build_paths
from .olsr import OlsrAgent
from .rng import make_streams
from .scenario import Scenario

AGENTS = {"olsr": OlsrAgent, "dsr": DsrAgent, "hirol": HirolAgent}


@dataclass(frozen=True)
class Flow:
    index: int
    src: int
    dst: int
    start_us: int
    interval_us: int


class Context:
    """What an agent may see: the clock, the scenario, the radio and the metrics sink."""

    def __init__(self, sc: Scenario, queue: EventQueue, link: LinkLayer, metrics: MetricsCollector,
                 rngs: dict, classifier):
        self.sc = sc
        self.queue = queue
        self.link = link
        self.metrics = metrics
        self.rngs = rngs
        self.classifier = classifier

    @property
    def now(self) -> int:
        return self.queue.now

    def timer(self, delay_us: int, fn: Callable, *args) -> None:
        self.queue.schedule(self.queue.now + delay_us, EventKind.TIMER_FIRE, (fn, args))


def build_flows(sc: Scenario, traffic_rng) -> list[Flow]:
    """CBR flows between distinct random node pairs (or ``sc.flows`` when given)."""
    pairs = []
    if sc.flows is not None:
        pairs = list(sc.flows)
    else:
        for _ in range(sc.cbr_connections):
            s = traffic_rng.randrange(sc.node_count)
            d = traffic_rng.randrange(sc.node_count - 1)
            pairs.append((s, d + 1 if d >= s else d))
    lo, hi = sc.traffic_start
    interval = to_us(1.0 / sc.cbr_rate)
    return [Flow(i, s, d, to_us(traffic_rng.uniform(lo, hi)), interval) for i, (s, d) in enumerate(pairs)]


class Simulation:
    """One run of one protocol on one scenario.

    ``on_receive(pkt, frm, to, now_us)`` is called for every packet arrival
    before the receiving agent handles it; the trainer uses it to sample links.
    """

    def __init__(self, sc: Scenario, classifier=None, on_receive: Optional[Callable] = None):
        sc.validate()
        self.sc = sc
        self.rngs = make_streams(sc.seed)
        horizon = sc.sim_time + sc.ann_params.lookahead + 1.0
        self.paths = build_paths(sc, self.rngs["mobility"], horizon)
        self.queue = EventQueue()
        self.metrics = MetricsCollector(sc)
        self.link = LinkLayer(sc, self.queue, self.paths, self.rngs["loss"], self.metrics)
        if classifier is None and sc.protocol == "hirol" and sc.hirol_params.use_ann:
            from .training import default_classifier
            classifier = default_classifier(sc)
        self.ctx = Context(sc, self.queue, self.link, self.metrics, self.rngs, classifier)
        self.agents = [AGENTS[sc.protocol](i, self.ctx) for i in range(sc.node_count)]
        self.link.on_failure = lambda node, pkt, to: self.agents[node].on_tx_failure(pkt, to)
        self.on_receive = on_receive
        self.end_us = to_us(sc.sim_time)
        self.flows = build_flows(sc, self.rngs["traffic"])
        self.flow_seq = [0] * len(self.flows)
        self._schedule_initial()

    def _jittered(self, interval: float) -> int:
        j = self.sc.timer_jitter
        return to_us(interval * (1.0 + j * (2.0 * self.rngs["traffic"].random() - 1.0)))

    def _schedule_initial(self) -> None:
        q = self.queue
        for f in self.flows:
            if f.start_us < self.end_us:
                q.schedule(f.start_us, EventKind.APP_SEND, f.index)
        if self.sc.protocol in ("olsr", "hirol"):
            rng = self.rngs["traffic"]
            for n in range(self.sc.node_count):
                q.schedule(to_us(rng.uniform(0, self.sc.hello_interval)), EventKind.HELLO_DUE, n)
                q.schedule(to_us(rng.uniform(0, self.sc.tc_interval)), EventKind.TC_DUE, n)
        for n, path in enumerate(self.paths):
            for t in path.waypoint_times():
                if 0 < t < self.sc.sim_time:
                    q.schedule(to_us(t), EventKind.WAYPOINT_REACHED, n)
        q.schedule(self.end_us, EventKind.SIM_END)

    def _app_send(self, idx: int) -> None:
        f = self.flows[idx]
        now = self.queue.now
        seq = self.flow_seq[idx]
        self.flow_seq[idx] += 1
        pkt = Packet(PacketKind.DATA, f.src, f.dst, self.sc.packet_size, now, flow=idx, seq=seq)
        self.metrics.on_send(pkt)
        self.agents[f.src].send(pkt)
        nxt = now + f.interval_us
        if nxt < self.end_us:
            self.queue.schedule(nxt, EventKind.APP_SEND, idx)

    def step(self) -> bool:
        """Dispatch one event; False once the end-of-run event has been handled."""
        ev = self.queue.pop()
        kind = ev.kind
        if kind is EventKind.PACKET_ARRIVAL:
            pkt, frm, to = ev.payload
            if pkt.kind is not PacketKind.DATA:
                self.metrics.on_control_rx(pkt, ev.time)
            if self.on_receive is not None:
                self.on_receive(pkt, frm, to, ev.time)
            self.agents[to].receive(pkt, frm)
        elif kind is EventKind.TIMER_FIRE:
            fn, args = ev.payload
            fn(*args)
        elif kind is EventKind.APP_SEND:
            self._app_send(ev.payload)
        elif kind is EventKind.HELLO_DUE:
            self.agents[ev.payload].hello_tick()
            self.queue.schedule(ev.time + self._jittered(self.sc.hello_interval), EventKind.HELLO_DUE, ev.payload)
        elif kind is EventKind.TC_DUE:
            self.agents[ev.payload].tc_tick()
            self.queue.schedule(ev.time + self._jittered(self.sc.tc_interval), EventKind.TC_DUE, ev.payload)
        elif kind is EventKind.SIM_END:
            return False
        return True

    def run_until(self, t_us: int) -> None:
        while self.queue.peek_time() is not None and self.queue.peek_time() <= t_us:
            if not self.step():
                break

    def run(self) -> MetricsReport:
        while self.step():
            pass
        return self.report()

    def report(self) -> MetricsReport:
        return self.metrics.report(self.sc.protocol, self.sc.speed, self.sc.seed,
                                   self.queue.trace_hash(), self.queue.dispatched)


def run(scenario: Scenario, classifier=None) -> MetricsReport:
    """Simulate ``scenario`` to its end time and return the finalised report."""
    return Simulation(scenario, classifier).run()
