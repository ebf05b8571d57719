"""Discrete-event core: integer-microsecond clock, event heap, named RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass
from typing import Any, Callable

US_PER_S = 1_000_000
US_PER_MS = 1_000


def seconds(s: float) -> int:
    """Convert seconds to integer microseconds (rounded to nearest)."""
    return int(round(s * US_PER_S))


def to_seconds(t_us: int) -> float:
    return t_us / US_PER_S


class SchedulingError(RuntimeError):
    """Raised for events scheduled in the past or otherwise malformed."""


class SimulationFault(RuntimeError):
    """An event handler raised; wraps the original exception and names the event."""

    def __init__(self, event: "Event", cause: BaseException):
        self.event = event
        self.cause = cause
        super().__init__(
            f"handler for event seq={event.seq} kind={event.kind!r} "
            f"target={event.target!r} at t={event.fire_at}us raised "
            f"{type(cause).__name__}: {cause}"
        )


class Event:
    __slots__ = ("fire_at", "seq", "target", "kind", "callback", "payload", "cancelled")

    def __init__(self, fire_at, seq, target, kind, callback, payload):
        self.fire_at = fire_at
        self.seq = seq
        self.target = target
        self.kind = kind
        self.callback = callback
        self.payload = payload
        self.cancelled = False

    def __repr__(self):
        return f"Event(t={self.fire_at}, seq={self.seq}, kind={self.kind!r}, target={self.target!r})"


@dataclass(frozen=True)
class RunSummary:
    events_fired: int
    clock: int


class RngStream:
    """A reproducible PRNG keyed by (global_seed, stream_id).

    The seed is derived through SHA-256 so that the sequence does not depend on
    Python's per-process string hashing.
    """

    def __init__(self, global_seed: int, stream_id: str):
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{global_seed}:{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def uniform_int(self, lo: int, hi: int) -> int:
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}] on stream {self.stream_id!r}")
        return self._rng.randint(lo, hi)

    def random(self) -> float:
        return self._rng.random()


def draw_uniform(stream: RngStream, lo: int, hi: int) -> int:
    return stream.uniform_int(lo, hi)


class Engine:
    """Single-threaded event scheduler.

    Events with equal ``fire_at`` fire in the order they were scheduled.
    Cancellation is lazy: cancelled entries stay on the heap and are skipped.
    """

    def __init__(self, seed: int = 0):
        self.now = 0
        self.seed = seed
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._live = 0
        self._streams: dict[str, RngStream] = {}
        self.events_fired = 0

    def __len__(self) -> int:
        return self._live

    def rng(self, stream_id: str) -> RngStream:
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return stream

    def schedule(self, fire_at: int, callback: Callable[..., Any], *payload,
                 target: Any = None, kind: str = "") -> Event:
        if fire_at < self.now:
            raise SchedulingError(f"cannot schedule at t={fire_at}us, clock is {self.now}us")
        seq = self._seq
        self._seq = seq + 1
        ev = Event(fire_at, seq, target, kind, callback, payload)
        heapq.heappush(self._heap, (fire_at, seq, ev))
        self._live += 1
        return ev

    def after(self, delay: int, callback: Callable[..., Any], *payload,
              target: Any = None, kind: str = "") -> Event:
        return self.schedule(self.now + delay, callback, *payload, target=target, kind=kind)

    def cancel(self, ev: Event | None) -> None:
        if ev is not None and not ev.cancelled:
            ev.cancelled = True
            self._live -= 1

    def peek_time(self) -> int | None:
        heap = self._heap
        while heap and heap[0][2].cancelled:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def run_until(self, t_end: int) -> RunSummary:
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before clock {self.now}")
        heap = self._heap
        pop = heapq.heappop
        fired = 0
        while heap:
            fire_at, _, ev = heap[0]
            if fire_at > t_end:
                break
            pop(heap)
            if ev.cancelled:
                continue
            # Mark consumed so a late cancel() does not corrupt the live count.
            ev.cancelled = True
            self._live -= 1
            self.now = fire_at
            try:
                ev.callback(*ev.payload)
            except SimulationFault:
                raise
            except Exception as exc:
                raise SimulationFault(ev, exc) from exc
            fired += 1
        self.now = t_end
        self.events_fired += fired
        return RunSummary(fired, self.now)
