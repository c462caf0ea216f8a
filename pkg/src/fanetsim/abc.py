"""Artificial bee colony search over per-edge weights.

A solution is one continuous weight per edge of a small topology snapshot;
it is decoded into the lowest-total-weight path from src to dst, and the
colony maximises the fitness of that path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import weighted_shortest_path
from .scenario import AbcParams

NO_ROUTE = -math.inf


@dataclass
class BeeSolution:
    weights: list
    decoded_route: Optional[tuple] = None
    fitness: float = NO_ROUTE
    trials: int = 0

    def copy(self) -> "BeeSolution":
        return BeeSolution(list(self.weights), self.decoded_route, self.fitness, self.trials)


@dataclass(frozen=True)
class Snapshot:
    """Candidate edges with per-edge delivery quality and expected hop delay (s)."""

    src: int
    dst: int
    edges: tuple
    quality: tuple
    hop_delay: tuple
    node_count: int

    @property
    def nodes(self) -> set:
        return {n for e in self.edges for n in e}

    def edge_index(self) -> dict:
        idx = {}
        for i, (u, v) in enumerate(self.edges):
            idx[(u, v)] = i
            idx[(v, u)] = i
        return idx


def decode_route(weights: Sequence[float], snap: Snapshot) -> Optional[tuple]:
    adj: dict = {}
    for w, (u, v) in zip(weights, snap.edges):
        adj.setdefault(u, {})[v] = w
        adj.setdefault(v, {})[u] = w
    path = weighted_shortest_path(snap.src, snap.dst, adj)
    return tuple(path) if path else None


def simple_paths(snap: Snapshot, limit: int = 64) -> Optional[list[tuple]]:
    """All simple src-dst paths of the snapshot, or None if there are more than ``limit``."""
    adj: dict = {}
    for u, v in snap.edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    out = []
    stack = [(snap.src, (snap.src,))]
    while stack:
        node, path = stack.pop()
        if node == snap.dst:
            out.append(path)
            if len(out) > limit:
                return None
            continue
        for nb in adj.get(node, ()):
            if nb not in path:
                stack.append((nb, path + (nb,)))
    return out


class RouteDecoder:
    """Lowest-total-weight path decoding with the path set enumerated once.

    Small snapshots (the usual case) are decoded by scoring every simple path;
    larger ones fall back to Dijkstra. Ties go to the path found first.
    """

    def __init__(self, snap: Snapshot, limit: int = 64):
        self.snap = snap
        paths = simple_paths(snap, limit)
        if paths is None:
            self.paths = None
            return
        paths.sort(key=lambda p: (len(p), p))
        idx = snap.edge_index()
        self.paths = [(p, [idx[(u, v)] for u, v in zip(p, p[1:])]) for p in paths]

    def __call__(self, weights: Sequence[float]) -> Optional[tuple]:
        if self.paths is None:
            return decode_route(weights, self.snap)
        best, best_w = None, math.inf
        for p, ids in self.paths:
            w = 0.0
            for i in ids:
                w += weights[i]
            if w < best_w:
                best, best_w = p, w
        return best


def route_fitness(route, snap: Snapshot, params: AbcParams) -> float:
    """Reward-minus-costs: w3 * PDR_est - w1 * hops/node_count - w2 * delay/delay_cap."""
    if route is None:
        return NO_ROUTE
    idx = snap.edge_index()
    pdr_est = 1.0
    delay = 0.0
    for u, v in zip(route, route[1:]):
        i = idx[(u, v)]
        pdr_est *= snap.quality[i]
        delay += snap.hop_delay[i]
    hops = len(route) - 1
    return (params.w3 * pdr_est - params.w1 * hops / snap.node_count
            - params.w2 * delay / params.delay_cap)


def fitness(x: BeeSolution, snap: Snapshot, params: AbcParams) -> float:
    x.decoded_route = decode_route(x.weights, snap)
    x.fitness = route_fitness(x.decoded_route, snap, params)
    return x.fitness


def init_colony(params: AbcParams, dims: int, rng) -> list[BeeSolution]:
    if dims < 1:
        raise ValueError("dims must be >= 1")
    return [BeeSolution([rng.uniform(params.w_min, params.w_max) for _ in range(dims)])
            for _ in range(params.colony_size)]


def _perturb(center: BeeSolution, step_size: float, rng, w_min: float, w_max: float) -> BeeSolution:
    new = BeeSolution(list(center.weights), trials=center.trials)
    j = rng.randrange(len(new.weights))
    v = new.weights[j] + step_size * (rng.random() - 0.5)
    new.weights[j] = min(max(v, w_min), w_max)
    return new


def perturb_employed(x: BeeSolution, step_size: float, rng, w_min: float = 0.1,
                     w_max: float = 10.0) -> BeeSolution:
    """X' = X + step * (u - 0.5) on one uniformly chosen coordinate, clamped."""
    return _perturb(x, step_size, rng, w_min, w_max)


def perturb_onlooker(x_best: BeeSolution, step_size: float, rng, w_min: float = 0.1,
                     w_max: float = 10.0) -> BeeSolution:
    """X'' = X_best + step * (u - 0.5) on one coordinate, clamped."""
    return _perturb(x_best, step_size, rng, w_min, w_max)


def migration_probabilities(objectives: Sequence[float], w: float = 1.0) -> np.ndarray:
    """Normalised ``exp((max - obj_k) / w)`` over cost-style objectives.

    Infinite costs get probability 0. Computed as ``exp((min - obj_k) / w)``
    before normalising, which is the same distribution without overflow.
    """
    obj = np.asarray(objectives, dtype=float)
    if obj.size == 0:
        raise ValueError("objectives must be nonempty")
    if not w > 0:
        raise ValueError("w must be > 0")
    finite = np.isfinite(obj)
    if not finite.any():
        return np.full(obj.size, 1.0 / obj.size)
    raw = np.zeros(obj.size)
    lo = obj[finite].min()
    raw[finite] = np.exp((lo - obj[finite]) / w)
    return raw / raw.sum()


def _roulette(probs: np.ndarray, rng) -> int:
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return int(np.flatnonzero(probs > 0)[-1])


def optimize(snap: Snapshot, params: AbcParams, rng, trace: Optional[list] = None) -> BeeSolution:
    """Employed, onlooker and scout phases until max_iter or convergence.

    ``trace`` (if given) receives the best fitness after initialisation and
    after every iteration.
    """
    nodes = snap.nodes
    if snap.src not in nodes or snap.dst not in nodes:
        raise ValueError(f"snapshot does not contain both src {snap.src} and dst {snap.dst}")
    memo: dict = {}
    decode = RouteDecoder(snap)

    def evaluate(x: BeeSolution) -> float:
        x.decoded_route = decode(x.weights)
        f = memo.get(x.decoded_route)
        if f is None:
            f = memo[x.decoded_route] = route_fitness(x.decoded_route, snap, params)
        x.fitness = f
        return f

    lo, hi, step = params.w_min, params.w_max, params.step_size
    colony = init_colony(params, len(snap.edges), rng)
    for x in colony:
        evaluate(x)
    best = max(colony, key=lambda s: s.fitness).copy()
    if trace is not None:
        trace.append(best.fitness)
    prev = best.fitness
    stall = 0

    def greedy(i: int, cand: BeeSolution) -> None:
        if evaluate(cand) > colony[i].fitness:
            cand.trials = 0
            colony[i] = cand
        else:
            colony[i].trials += 1

    for _ in range(params.max_iter):
        for i in range(len(colony)):
            greedy(i, perturb_employed(colony[i], step, rng, lo, hi))
        probs = migration_probabilities([-x.fitness for x in colony], params.migration_scale)
        for _ in range(len(colony)):
            k = _roulette(probs, rng)
            center = colony[k] if params.onlooker_mode == "migration" else best
            greedy(k, perturb_onlooker(center, step, rng, lo, hi))
        for x in colony:
            if x.fitness > best.fitness:
                best = x.copy()
        for i, x in enumerate(colony):
            if x.trials > params.limit:
                fresh = BeeSolution([rng.uniform(lo, hi) for _ in range(len(snap.edges))])
                evaluate(fresh)
                colony[i] = fresh
                if fresh.fitness > best.fitness:
                    best = fresh.copy()
        if trace is not None:
            trace.append(best.fitness)
        delta = best.fitness - prev
        if not math.isfinite(best.fitness) or abs(delta) < params.epsilon:
            stall += 1
            if stall >= params.patience:
                break
        else:
            stall = 0
        prev = best.fitness
    return best
