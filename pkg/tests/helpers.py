"""Oracles and fakes shared by the protocol tests."""
import itertools
from collections import deque

from fanetsim.events import EventQueue
from fanetsim.metrics import MetricsCollector
from fanetsim.rng import make_streams
from fanetsim.scenario import Scenario


def bfs_distances(adj, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def random_graph(rng, n, p):
    adj = {i: set() for i in range(n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def strict_two_hop(adj, me):
    one = adj[me]
    return {t for n in one for t in adj[n]} - one - {me}


def min_mpr_cover(one_hop, two_hop):
    """Smallest subset of ``one_hop`` covering the strict 2-hop set (brute force)."""
    targets = set().union(*(set(two_hop.get(n, ())) for n in one_hop)) - set(one_hop) if one_hop else set()
    for k in range(len(one_hop) + 1):
        for combo in itertools.combinations(sorted(one_hop), k):
            covered = set().union(*(two_hop.get(n, set()) for n in combo)) if combo else set()
            if targets <= covered:
                return set(combo)
    raise AssertionError("unreachable: all neighbours together cover the 2-hop set")


class FakeLink:
    def __init__(self):
        self.sent = []

    def broadcast(self, pkt, frm, now):
        self.sent.append(("bc", pkt, frm))
        return 0

    def transmit(self, pkt, frm, to, now):
        self.sent.append(("uc", pkt, frm, to))
        return True


class FakeCtx:
    """Just enough context for driving one protocol state machine by hand."""

    def __init__(self, sc=None):
        self.sc = sc or Scenario()
        self.queue = EventQueue()
        self.link = FakeLink()
        self.metrics = MetricsCollector(self.sc)
        self.rngs = make_streams(self.sc.seed)
        self.classifier = None
        self.timers = []

    @property
    def now(self):
        return self.queue.now

    def advance(self, us):
        self.queue.now += us

    def timer(self, delay_us, fn, *args):
        self.timers.append((self.now + delay_us, fn, args))

    def run_timers(self):
        """Fire pending timers in time order (including ones they schedule)."""
        while self.timers:
            self.timers.sort(key=lambda e: e[0])
            t, fn, args = self.timers.pop(0)
            self.queue.now = max(self.queue.now, t)
            fn(*args)
