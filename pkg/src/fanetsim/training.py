"""Offline training of the link classifier on a simulated trace.

Every Hello reception in a link-state run yields one sample: the link's
features at that instant, labelled stable iff the two endpoints stay within
radio range for the following lookahead window (read off the trajectories).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ann import LinkClassifier, LinkContext, NetworkWeights, extract_features, forward, init_weights, train
from .link import PacketKind
from .mobility import distance
from .rng import make_streams
from .scenario import Scenario

LABEL_STEP = 0.1  # seconds between range checks inside the lookahead window


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    @property
    def stable_fraction(self) -> float:
        return float(self.y.mean()) if len(self.y) else 0.0


@dataclass
class TrainingResult:
    net: NetworkWeights
    train: Dataset
    holdout: Dataset
    history: list
    train_accuracy: float
    holdout_accuracy: float
    majority_accuracy: float


def training_scenario(base: Scenario) -> Scenario:
    """Link-state run on the default topology; radio, timers and ANN settings come from ``base``."""
    ann = base.ann_params
    d = Scenario()
    return base.replace(protocol="olsr", speed=ann.train_speed, sim_time=ann.train_time,
                        seed=ann.train_seed, mobility="random-waypoint", positions=None, flows=None,
                        node_count=d.node_count, arena=d.arena, cbr_connections=d.cbr_connections,
                        traffic_start=d.traffic_start, pause_time=d.pause_time)


def stays_linked(path_a, path_b, t: float, horizon: float, radio_range: float) -> bool:
    steps = int(round(horizon / LABEL_STEP))
    for k in range(1, steps + 1):
        tk = t + k * LABEL_STEP
        if distance(path_a.position(tk), path_b.position(tk)) > radio_range:
            return False
    return True


def collect_dataset(sc: Scenario) -> Dataset:
    """Run ``sc`` and sample every Hello reception."""
    from .engine import Simulation

    rows, labels = [], []
    ann = sc.ann_params

    def hook(pkt, frm, to, now_us):
        if pkt.kind is not PacketKind.HELLO:
            return
        link = sim.link
        t = now_us / 1e6
        ctx = LinkContext(link.position(to, now_us), link.position(frm, now_us),
                          link.velocity(to, now_us), link.velocity(frm, now_us), sc.radio_range,
                          link.link_quality(to, frm, ann.quality_window, now_us),
                          link.queue_load(frm, now_us), ann.max_speed)
        rows.append(extract_features(ctx))
        labels.append(1.0 if stays_linked(sim.paths[to], sim.paths[frm], t, ann.lookahead, sc.radio_range) else 0.0)

    sim = Simulation(sc, on_receive=hook)
    sim.run()
    return Dataset(np.array(rows, dtype=float).reshape(-1, 4), np.array(labels, dtype=float))


def split(ds: Dataset, fraction: float, rng) -> tuple[Dataset, Dataset]:
    """Shuffled split; ``fraction`` of the samples go to the first part."""
    idx = list(range(len(ds)))
    for i in range(len(idx) - 1, 0, -1):
        j = rng.randrange(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    cut = int(round(fraction * len(idx)))
    a, b = np.array(idx[:cut], dtype=int), np.array(idx[cut:], dtype=int)
    return Dataset(ds.X[a], ds.y[a]), Dataset(ds.X[b], ds.y[b])


def accuracy(net: NetworkWeights, ds: Dataset, threshold: float = 0.5) -> float:
    if not len(ds):
        return 0.0
    _, out = forward(net, ds.X)
    pred = (out[:, 0] >= threshold).astype(float)
    return float((pred == ds.y).mean())


def train_classifier(base: Scenario, dataset: Optional[Dataset] = None) -> TrainingResult:
    ann = base.ann_params
    if dataset is None:
        dataset = collect_dataset(training_scenario(base))
    if len(dataset) < 10:
        raise ValueError(f"training dataset has only {len(dataset)} samples")
    streams = make_streams(ann.train_seed)
    tr, ho = split(dataset, 0.8, streams["ann"])
    net = init_weights(streams["ann"], ann.input_size, ann.hidden_size, ann.output_size)
    net, history = train(net, tr.X, tr.y, lr=ann.learning_rate, epochs=ann.epochs)
    majority = max(ho.stable_fraction, 1.0 - ho.stable_fraction) if len(ho) else 0.0
    return TrainingResult(net, tr, ho, history, accuracy(net, tr, ann.threshold),
                          accuracy(net, ho, ann.threshold), majority)


_CACHE: dict = {}


def default_classifier(sc: Scenario) -> LinkClassifier:
    """A fresh classifier built from the (memoised) offline-trained weights."""
    key = repr(training_scenario(sc))
    net = _CACHE.get(key)
    if net is None:
        net = _CACHE[key] = train_classifier(sc).net
    ann = sc.ann_params
    return LinkClassifier(net, ann.threshold, ann.nlms_beta)
