"""3D random-waypoint mobility."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .rng import RandomStream


class Position3D(NamedTuple):
    x: float
    y: float
    z: float


def distance(p, q) -> float:
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2)


class LegWindowError(ValueError):
    """Position requested outside a leg's time window."""


@dataclass(frozen=True)
class NodeTrajectory:
    """One straight leg of a node's motion, optionally followed by a pause."""

    node: int
    leg_start: Position3D
    leg_end: Position3D
    leg_start_time: float
    speed: float
    pause_until: Optional[float] = None

    @property
    def length(self) -> float:
        return distance(self.leg_start, self.leg_end)

    @property
    def arrival_time(self) -> float:
        return self.leg_start_time + self.length / self.speed

    @property
    def end_time(self) -> float:
        """Time the node leaves ``leg_end`` (arrival plus pause)."""
        return self.pause_until if self.pause_until is not None else self.arrival_time

    def velocity(self, t: float) -> tuple[float, float, float]:
        if t >= self.arrival_time or self.length == 0.0:
            return (0.0, 0.0, 0.0)
        k = self.speed / self.length
        s, e = self.leg_start, self.leg_end
        return ((e[0] - s[0]) * k, (e[1] - s[1]) * k, (e[2] - s[2]) * k)


def position_at(traj: NodeTrajectory, t: float) -> Position3D:
    if t < traj.leg_start_time or t > traj.end_time:
        raise LegWindowError(
            f"t={t} outside leg window [{traj.leg_start_time}, {traj.end_time}] of node {traj.node}")
    arrival = traj.arrival_time
    if t >= arrival:
        return traj.leg_end
    if t == traj.leg_start_time:
        return traj.leg_start
    f = (t - traj.leg_start_time) / (arrival - traj.leg_start_time)
    s, e = traj.leg_start, traj.leg_end
    return Position3D(s[0] + (e[0] - s[0]) * f, s[1] + (e[1] - s[1]) * f, s[2] + (e[2] - s[2]) * f)


def random_point(rng: RandomStream, arena) -> Position3D:
    return Position3D(rng.uniform(0.0, arena[0]), rng.uniform(0.0, arena[1]), rng.uniform(0.0, arena[2]))


def next_waypoint(traj: NodeTrajectory, rng: RandomStream, arena, pause: float = 0.0) -> NodeTrajectory:
    """Start a new leg at the end of ``traj`` towards a uniform point in the arena."""
    start = traj.leg_end
    end = random_point(rng, arena)
    while end == start:
        end = random_point(rng, arena)
    t0 = traj.end_time
    leg = NodeTrajectory(traj.node, start, end, t0, traj.speed)
    if pause > 0:
        leg = NodeTrajectory(traj.node, start, end, t0, traj.speed, leg.arrival_time + pause)
    return leg


class Path:
    """All legs of one node, pre-generated up to a horizon."""

    def __init__(self, legs: list[NodeTrajectory]):
        self.legs = legs
        self._starts = [leg.leg_start_time for leg in legs]
        # per leg: start, arrival, end, start point, end point, velocity
        self._table = [(leg.leg_start_time, leg.arrival_time, leg.end_time, leg.leg_start, leg.leg_end,
                        leg.velocity(leg.leg_start_time)) for leg in legs]

    def leg_at(self, t: float) -> NodeTrajectory:
        i = bisect.bisect_right(self._starts, t) - 1
        return self.legs[max(i, 0)]

    def position(self, t: float) -> Position3D:
        """Same interpolation as ``position_at``; past the horizon the final point is held."""
        i = bisect.bisect_right(self._starts, t) - 1
        t0, ta, _, s, e, _ = self._table[i if i > 0 else 0]
        if t >= ta:
            return e
        if t <= t0:
            return s
        f = (t - t0) / (ta - t0)
        return Position3D(s[0] + (e[0] - s[0]) * f, s[1] + (e[1] - s[1]) * f, s[2] + (e[2] - s[2]) * f)

    def velocity(self, t: float) -> tuple[float, float, float]:
        i = bisect.bisect_right(self._starts, t) - 1
        t0, ta, _, _, _, v = self._table[i if i > 0 else 0]
        return v if t < ta else (0.0, 0.0, 0.0)

    def waypoint_times(self) -> list[float]:
        return [leg.arrival_time for leg in self.legs]


def random_waypoint_path(node: int, rng: RandomStream, arena, speed: float, horizon: float,
                         pause: float = 0.0) -> Path:
    start = random_point(rng, arena)
    first = NodeTrajectory(node, start, start, 0.0, speed, 0.0)
    legs = []
    leg = first
    while True:
        leg = next_waypoint(leg, rng, arena, pause)
        legs.append(leg)
        if leg.end_time >= horizon:
            break
    return Path(legs)


def static_path(node: int, pos, horizon: float) -> Path:
    p = Position3D(*pos)
    return Path([NodeTrajectory(node, p, p, 0.0, 1.0, float("inf"))])


def build_paths(scenario, mobility_rng: RandomStream, horizon: float) -> list[Path]:
    if scenario.mobility == "static":
        return [static_path(i, p, horizon) for i, p in enumerate(scenario.positions)]
    paths = []
    for i in range(scenario.node_count):
        rng = mobility_rng.split(f"node{i}")
        paths.append(random_waypoint_path(i, rng, scenario.arena, scenario.speed, horizon,
                                          scenario.pause_time))
    return paths
