"""Piecewise-linear waypoint motion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .engine import US_PER_S

NEVER = 2**63 - 1
REEVALUATION_INTERVAL = US_PER_S


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    speed: float  # m/s on the segment that ends at this waypoint

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError(f"waypoint speed must be positive, got {self.speed}")


@dataclass(frozen=True)
class WaypointPath:
    start_position: tuple[float, float]
    start_time: int = 0
    waypoints: tuple[Waypoint, ...] = ()

    @cached_property
    def _segments(self) -> list[tuple[float, float, float, float, float, float]]:
        """(t0, t1, x0, y0, x1, y1) per segment, times in microseconds (float)."""
        segs = []
        t = float(self.start_time)
        x0, y0 = self.start_position
        for wp in self.waypoints:
            dt = math.hypot(wp.x - x0, wp.y - y0) / wp.speed * US_PER_S
            segs.append((t, t + dt, x0, y0, wp.x, wp.y))
            t += dt
            x0, y0 = wp.x, wp.y
        return segs

    @property
    def end_time(self) -> float:
        segs = self._segments
        return segs[-1][1] if segs else float(self.start_time)

    @property
    def boundaries(self) -> list[float]:
        return [s[1] for s in self._segments]

    @property
    def max_speed(self) -> float:
        return max((wp.speed for wp in self.waypoints), default=0.0)

    @property
    def is_static(self) -> bool:
        return not self.waypoints


def position_at(path: WaypointPath, t: int) -> tuple[float, float]:
    if t < 0:
        raise ValueError("time must be non-negative")
    if t <= path.start_time or not path.waypoints:
        return path.start_position
    for t0, t1, x0, y0, x1, y1 in path._segments:
        if t < t1:
            f = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
    last = path.waypoints[-1]
    return (last.x, last.y)


def next_move_event(path: WaypointPath, t: int, interval: int = REEVALUATION_INTERVAL) -> int:
    """Next time link rates should be re-evaluated, or NEVER once stationary for good."""
    if path.is_static or t >= path.end_time:
        return NEVER
    if t < path.start_time:
        return path.start_time
    for b in path.boundaries:
        if b > t:
            return min(t + interval, math.ceil(b))
    return NEVER


def count_reevaluations(path: WaypointPath, horizon: int,
                        interval: int = REEVALUATION_INTERVAL) -> int:
    n, t = 0, 0
    while True:
        t = next_move_event(path, t, interval)
        if t > horizon or t == NEVER:
            return n
        n += 1


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
