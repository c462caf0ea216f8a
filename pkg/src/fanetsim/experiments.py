"""Speed sweeps and message-batch overhead runs across the three protocols."""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .ann import LinkClassifier, NetworkWeights
from .engine import Simulation
from .events import to_us
from .metrics import (MetricsReport, TABLE_PROTOCOLS, aggregate, batch_windows, emit_report,
                      metric_table, overhead)
from .scenario import PROTOCOLS, SWEEP_SPEEDS, Scenario

BATCHES = (10, 20, 30, 40, 50, 60)
BATCH_WARMUP = 30.0  # seconds; every flow has started and routes have settled


class SweepError(RuntimeError):
    def __init__(self, protocol: str, speed: float, seed: int, cause: BaseException):
        super().__init__(f"run failed for protocol={protocol} speed={speed} seed={seed}: {cause!r}")
        self.protocol = protocol
        self.speed = speed
        self.seed = seed


@dataclass
class SweepSpec:
    protocols: Sequence[str] = PROTOCOLS
    speeds: Sequence[float] = SWEEP_SPEEDS
    seeds: Sequence[int] = tuple(range(1, 11))
    base: Scenario = field(default_factory=Scenario)
    out_dir: Optional[Path] = None
    batches: Sequence[int] = BATCHES
    overhead_speed: Optional[float] = 20.0  # runs at this speed also feed the batch table
    batch_warmup: float = BATCH_WARMUP
    jobs: int = 1

    def validate(self) -> None:
        errs = []
        if not self.protocols:
            errs.append("protocols must be nonempty")
        if any(p not in PROTOCOLS for p in self.protocols):
            errs.append(f"protocols must be a subset of {PROTOCOLS}")
        if not self.speeds:
            errs.append("speeds must be nonempty")
        if not self.seeds:
            errs.append("seeds must be nonempty")
        if self.jobs < 1:
            errs.append("jobs must be >= 1")
        if errs:
            raise ValueError("; ".join(errs))

    def cells(self) -> list[Scenario]:
        return [self.base.replace(protocol=p, speed=float(s), seed=int(seed))
                for p in self.protocols for s in self.speeds for seed in self.seeds]


@dataclass
class RunResult:
    report: MetricsReport
    batch_ms: dict  # batch size -> control processing ms


@dataclass
class SweepResult:
    results: list
    overhead: dict  # batch -> protocol -> seed-mean ms
    written: list = field(default_factory=list)

    @property
    def reports(self) -> list[MetricsReport]:
        return [r.report for r in self.results]


def make_classifier(sc: Scenario, net: Optional[NetworkWeights]):
    if net is None:
        return None
    return LinkClassifier(net, sc.ann_params.threshold, sc.ann_params.nlms_beta)


def run_cell(sc: Scenario, net: Optional[NetworkWeights] = None,
             batches: Sequence[int] = BATCHES, warmup: float = BATCH_WARMUP) -> RunResult:
    """One simulation plus the control processing time spent while its first
    ``b`` data messages after ``warmup`` were sent, for each batch size ``b``."""
    sim = Simulation(sc, make_classifier(sc, net))
    report = sim.run()
    windows = batch_windows(sim.metrics.send_times_us, batches, to_us(warmup))
    ms = overhead(sim.metrics.control_rx_times, windows, sc.processing_delay)
    return RunResult(report, ms)


def _cell_job(args):
    sc, net, batches, warmup = args
    try:
        return run_cell(sc, net, batches, warmup)
    except Exception as exc:  # re-raised with the cell named
        raise SweepError(sc.protocol, sc.speed, sc.seed, exc) from exc


def overhead_table(results: Sequence[RunResult], speed: Optional[float]) -> dict:
    acc: dict = {}
    for r in results:
        if speed is None or r.report.speed != speed:
            continue
        for b, ms in r.batch_ms.items():
            acc.setdefault(b, {}).setdefault(r.report.protocol, []).append(ms)
    return {b: {p: statistics.fmean(v) for p, v in per.items()} for b, per in sorted(acc.items())}


def run_sweep(spec: SweepSpec, net: Optional[NetworkWeights] = None,
              progress: Optional[Callable[[RunResult], None]] = None) -> SweepResult:
    """Run every (protocol, speed, seed) cell; write CSVs when ``spec.out_dir`` is set.

    ``net`` fixes the HIROL classifier weights; without it each process trains
    its own (deterministically) on first use.
    """
    spec.validate()
    for sc in spec.cells():
        sc.validate()
    jobs = [(sc, net, tuple(spec.batches), spec.batch_warmup) for sc in spec.cells()]
    results = []
    if spec.jobs == 1:
        for job in jobs:
            res = _cell_job(job)
            results.append(res)
            if progress:
                progress(res)
    else:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(spec.jobs) as pool:
            for res in pool.imap(_cell_job, jobs):
                results.append(res)
                if progress:
                    progress(res)
    table = overhead_table(results, spec.overhead_speed)
    out = SweepResult(results, table)
    if spec.out_dir is not None:
        out.written = emit_report(out.reports, spec.out_dir, table or None)
    return out


def format_table(reports: Sequence[MetricsReport], metric: str = "pdr", digits: int = 3) -> str:
    """Plain-text table with a Speed column, one column per protocol and an average row."""
    cols, rows = metric_table(aggregate(reports), metric)
    labels = [label for label, _ in cols]
    lines = ["Speed  " + "  ".join(f"{c:>10}" for c in labels)]
    for s, vals in rows:
        lines.append(f"{s:<6g} " + "  ".join(f"{vals[c]:>10.{digits}f}" for c in labels))
    avg = [statistics.fmean(v[c] for _, v in rows) for c in labels]
    lines.append("Avg    " + "  ".join(f"{a:>10.{digits}f}" for a in avg))
    return "\n".join(lines)


def format_overhead(table: dict) -> str:
    labels = [(label, p) for label, p in TABLE_PROTOCOLS if any(p in v for v in table.values())]
    lines = ["Batch  " + "  ".join(f"{label:>10}" for label, _ in labels)]
    for b, vals in sorted(table.items()):
        lines.append(f"{b:<6d} " + "  ".join(f"{vals.get(p, float('nan')):>10.1f}" for _, p in labels))
    return "\n".join(lines)
