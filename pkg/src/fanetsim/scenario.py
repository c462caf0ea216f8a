"""Experiment description and parameter groups."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

PROTOCOLS = ("olsr", "dsr", "hirol")
MOBILITY_MODELS = ("random-waypoint", "static")
SWEEP_SPEEDS = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
TABLE1_SPEEDS = (7.0, 12.0, 18.0, 22.0, 28.0, 32.0, 37.0)


class ScenarioError(ValueError):
    """Aggregated validation failure; ``errors`` lists every offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario: " + "; ".join(errors))


@dataclass
class AbcParams:
    colony_size: int = 20
    max_iter: int = 30
    epsilon: float = 1e-4
    patience: int = 3  # consecutive iterations below epsilon before stopping
    step_size: float = 1.0
    limit: int = 10
    w1: float = 1.0 / 3.0  # energy (hop-count proxy)
    w2: float = 1.0 / 3.0  # latency
    w3: float = 1.0 / 3.0  # delivery ratio
    migration_scale: float = 1.0
    w_min: float = 0.1
    w_max: float = 10.0
    onlooker_mode: str = "migration"  # or "best"
    delay_cap: float = 0.05  # seconds; latency normaliser

    def errors(self) -> list[str]:
        errs = []
        if self.colony_size < 2:
            errs.append("abc_params.colony_size must be >= 2")
        if self.max_iter < 0:
            errs.append("abc_params.max_iter must be >= 0")
        if not self.step_size > 0:
            errs.append("abc_params.step_size must be > 0")
        if not self.epsilon > 0:
            errs.append("abc_params.epsilon must be > 0")
        if self.limit < 1:
            errs.append("abc_params.limit must be >= 1")
        if not self.migration_scale > 0:
            errs.append("abc_params.migration_scale must be > 0")
        if not 0 < self.w_min < self.w_max:
            errs.append("abc_params.w_min/w_max must satisfy 0 < w_min < w_max")
        if self.onlooker_mode not in ("migration", "best"):
            errs.append("abc_params.onlooker_mode must be 'migration' or 'best'")
        if not self.delay_cap > 0:
            errs.append("abc_params.delay_cap must be > 0")
        return errs


@dataclass
class AnnParams:
    input_size: int = 4
    hidden_size: int = 8
    output_size: int = 1
    threshold: float = 0.5
    nlms_beta: float = 0.5
    online: bool = True
    lookahead: float = 2.0  # seconds a link must survive to be labelled stable
    learning_rate: float = 2.0
    epochs: int = 4000
    max_speed: float = 40.0  # m/s, fixed normaliser for relative speed
    quality_window: float = 10.0  # seconds
    train_speed: float = 20.0
    train_time: float = 60.0
    train_seed: int = 7

    def errors(self) -> list[str]:
        errs = []
        for name in ("input_size", "hidden_size", "output_size"):
            if getattr(self, name) < 1:
                errs.append(f"ann_params.{name} must be >= 1")
        if not 0 < self.threshold < 1:
            errs.append("ann_params.threshold must be in (0, 1)")
        if not 0 < self.nlms_beta < 2:
            errs.append("ann_params.nlms_beta must be in (0, 2)")
        if not self.lookahead > 0:
            errs.append("ann_params.lookahead must be > 0")
        if not self.max_speed > 0:
            errs.append("ann_params.max_speed must be > 0")
        if not self.quality_window > 0:
            errs.append("ann_params.quality_window must be > 0")
        return errs


@dataclass
class HirolParams:
    zone_cell: tuple[float, float, float] = (200.0, 200.0, 200.0)
    use_ann: bool = True  # False: every link classified stable
    use_abc: bool = True  # False: first surviving candidate wins
    proactive_alternates: int = 2
    reply_limit: int = 3  # RREP copies answered per request
    repair_backoff: float = 0.1
    validate_interval: float = 0.5
    rediscovery_interval: float = 2.0
    buffer_timeout: float = 15.0  # matches the reactive discovery budget (1+2+4+8 s)
    relay_pruning: bool = False  # True: route requests relayed only by sender-designated relays
    relay_coverage: int = 1
    position_ttl: float = 15.0

    def errors(self) -> list[str]:
        errs = []
        if len(self.zone_cell) != 3 or any(not c > 0 for c in self.zone_cell):
            errs.append("hirol_params.zone_cell must be three positive lengths")
        if self.proactive_alternates < 0:
            errs.append("hirol_params.proactive_alternates must be >= 0")
        if self.relay_coverage < 1:
            errs.append("hirol_params.relay_coverage must be >= 1")
        if self.reply_limit < 1:
            errs.append("hirol_params.reply_limit must be >= 1")
        for name in ("repair_backoff", "validate_interval", "rediscovery_interval",
                     "buffer_timeout", "position_ttl"):
            if not getattr(self, name) > 0:
                errs.append(f"hirol_params.{name} must be > 0")
        return errs


@dataclass
class Scenario:
    arena: tuple[float, float, float] = (800.0, 800.0, 200.0)
    node_count: int = 20
    packet_size: int = 256
    max_cbr_connections: int = 200
    cbr_connections: int = 10
    cbr_rate: float = 2.0  # packets/second per connection
    traffic_start: tuple[float, float] = (10.0, 20.0)
    speed: float = 20.0
    speed_set: tuple[float, ...] = SWEEP_SPEEDS
    mobility: str = "random-waypoint"
    pause_time: float = 0.0
    positions: Optional[tuple[tuple[float, float, float], ...]] = None
    flows: Optional[tuple[tuple[int, int], ...]] = None
    sim_time: float = 210.0
    protocol: str = "hirol"
    seed: int = 1
    radio_range: float = 250.0
    p_loss: float = 0.02
    edge_loss: float = 0.4
    loss_exponent: float = 4.0
    bitrate: float = 1e6
    processing_delay: float = 1e-3
    max_retries: int = 2
    retry_timeout: float = 2e-3
    queue_capacity: int = 64
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    timer_jitter: float = 0.1
    link_notification: bool = True  # failed unicasts evict the neighbour at once
    cache_ttl: float = 30.0
    cache_routes: int = 3
    discovery_timeout: float = 1.0
    max_discovery_retries: int = 3
    send_buffer: int = 64
    reply_all: bool = False
    abc_params: AbcParams = field(default_factory=AbcParams)
    ann_params: AnnParams = field(default_factory=AnnParams)
    hirol_params: HirolParams = field(default_factory=HirolParams)

    def errors(self) -> list[str]:
        errs = []
        if self.node_count < 2:
            errs.append("node_count must be >= 2")
        if not self.sim_time > 0:
            errs.append("sim_time must be > 0")
        if self.packet_size <= 0:
            errs.append("packet_size must be > 0")
        if len(self.arena) != 3 or any(not a > 0 for a in self.arena):
            errs.append("arena extents must all be > 0")
        if not self.speed > 0:
            errs.append("speed must be > 0")
        if not self.speed_set or any(not s > 0 for s in self.speed_set):
            errs.append("speed_set values must be strictly positive")
        if self.mobility not in MOBILITY_MODELS:
            errs.append(f"mobility must be one of {MOBILITY_MODELS}")
        if self.protocol not in PROTOCOLS:
            errs.append(f"protocol must be one of {PROTOCOLS}")
        if self.pause_time < 0:
            errs.append("pause_time must be >= 0")
        if not self.radio_range > 0:
            errs.append("radio_range must be > 0")
        if not 0 <= self.p_loss <= 1:
            errs.append("p_loss must be in [0, 1]")
        if not 0 <= self.edge_loss <= 1:
            errs.append("edge_loss must be in [0, 1]")
        if not self.bitrate > 0:
            errs.append("bitrate must be > 0")
        if self.processing_delay < 0:
            errs.append("processing_delay must be >= 0")
        if self.max_retries < 0:
            errs.append("max_retries must be >= 0")
        if self.cbr_connections < 0 or self.cbr_connections > self.max_cbr_connections:
            errs.append("cbr_connections must be in [0, max_cbr_connections]")
        if not self.cbr_rate > 0:
            errs.append("cbr_rate must be > 0")
        if not self.hello_interval > 0:
            errs.append("hello_interval must be > 0")
        if not self.tc_interval > 0:
            errs.append("tc_interval must be > 0")
        if not 0 <= self.timer_jitter < 1:
            errs.append("timer_jitter must be in [0, 1)")
        if self.queue_capacity < 1:
            errs.append("queue_capacity must be >= 1")
        if self.cache_routes < 1:
            errs.append("cache_routes must be >= 1")
        if self.send_buffer < 1:
            errs.append("send_buffer must be >= 1")
        if self.max_discovery_retries < 0:
            errs.append("max_discovery_retries must be >= 0")
        if self.positions is not None and len(self.positions) != self.node_count:
            errs.append("positions must list one position per node")
        if self.mobility == "static" and self.positions is None:
            errs.append("static mobility requires positions")
        if self.flows is not None:
            for s, d in self.flows:
                if not (0 <= s < self.node_count and 0 <= d < self.node_count) or s == d:
                    errs.append(f"flow ({s}, {d}) is not a valid node pair")
        errs += self.abc_params.errors()
        errs += self.ann_params.errors()
        errs += self.hirol_params.errors()
        return errs

    def validate(self) -> "Scenario":
        errs = self.errors()
        if errs:
            raise ScenarioError(errs)
        return self

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)
