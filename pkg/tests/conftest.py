import pytest

from fanetsim.events import EventQueue
from fanetsim.link import LinkLayer
from fanetsim.metrics import MetricsCollector
from fanetsim.mobility import build_paths
from fanetsim.rng import RandomStream
from fanetsim.scenario import Scenario


def static_scenario(positions, flows=(), protocol="olsr", lossless=True, **kw):
    """Stationary nodes at ``positions``; lossless radio unless told otherwise."""
    base = dict(node_count=len(positions), mobility="static", positions=tuple(map(tuple, positions)),
                flows=tuple(flows), protocol=protocol)
    if lossless:
        base.update(p_loss=0.0, edge_loss=0.0)
    base.update(kw)
    return Scenario(**base)


def line(n, spacing=200.0):
    return [(50.0 + spacing * i, 400.0, 100.0) for i in range(n)]


class LinkRig:
    def __init__(self, positions, **kw):
        self.sc = static_scenario(positions, **kw)
        self.queue = EventQueue()
        self.metrics = MetricsCollector(self.sc)
        self.paths = build_paths(self.sc, None, 100.0)
        self.link = LinkLayer(self.sc, self.queue, self.paths, RandomStream(self.sc.seed, "loss"), self.metrics)
        self.failures = []
        self.link.on_failure = lambda node, pkt, to: self.failures.append((node, pkt, to))

    def drain(self):
        out = []
        while len(self.queue):
            ev = self.queue.pop()
            if ev.kind.name == "TIMER_FIRE":
                fn, args = ev.payload
                fn(*args)
            else:
                out.append(ev)
        return out


@pytest.fixture
def rig_factory():
    return LinkRig


# acceptance verdicts, criterion number -> (passed, detail); printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
