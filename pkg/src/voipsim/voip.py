"""G.711 media: talk-spurt frame timing, RTP streams, jitter buffer, quality verdict."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .engine import US_PER_MS
from .stack import encapsulate

FRAME_INTERVAL = 20 * US_PER_MS
FRAME_BYTES = 160
PLAYOUT_DELAY = 60 * US_PER_MS
JITTER_CAPACITY = 120 * US_PER_MS
LOSS_THRESHOLD = 0.05


def frame_times(spurts: Iterable[tuple[int, int]], media_start: int,
                media_end: int | None = None) -> Iterator[int]:
    """Frame generation instants. Spurt bounds are offsets from ``media_start``;
    a spurt [s, e) yields frames at s, s+20 ms, ... strictly before e."""
    for s, e in spurts:
        t = media_start + s
        stop = media_start + e
        if media_end is not None:
            stop = min(stop, media_end)
        while t < stop:
            yield t
            t += FRAME_INTERVAL


def talk_time(spurts: Iterable[tuple[int, int]]) -> int:
    return sum(e - s for s, e in spurts)


@dataclass
class G711Source:
    spurts: list[tuple[int, int]]
    frame_interval: int = FRAME_INTERVAL
    frame_bytes: int = FRAME_BYTES
    rtp_seq: int = 0
    rtp_start_at: int | None = None


class RtpSender:
    """Emits one 160-byte frame per 20 ms during talk spurts, while the dialog allows it."""

    def __init__(self, engine, node, dst_node: int, flow_id: str, spurts, port: int,
                 stats=None):
        self.engine = engine
        self.node = node
        self.dst_node = dst_node
        self.flow_id = flow_id
        self.source = G711Source(list(spurts))
        self.port = port
        self.stats = stats
        self.sent = 0
        self.send_times: list[int] = []
        self._times: Iterator[int] | None = None
        self._next = None
        self.active = False

    def start(self) -> None:
        now = self.engine.now
        self.source.rtp_start_at = now
        self.active = True
        self._times = frame_times(self.source.spurts, now)
        self._schedule_next()

    def stop(self) -> None:
        self.active = False
        self.engine.cancel(self._next)
        self._next = None

    def _schedule_next(self) -> None:
        t = next(self._times, None)
        if t is not None:
            self._next = self.engine.schedule(t, self._emit, kind="rtp.frame", target=self.flow_id)

    def _emit(self) -> None:
        now = self.engine.now
        pkt = encapsulate(self.source.frame_bytes, True, flow_id=self.flow_id,
                          src_node=self.node.id, dst_node=self.dst_node, created_at=now,
                          sequence_number=self.source.rtp_seq, data=(self.port, None))
        self.source.rtp_seq += 1
        self.sent += 1
        self.send_times.append(now)
        self.node.send(pkt)
        self._schedule_next()


class JitterOutcome(Enum):
    SCHEDULED_PLAY = "scheduled_play"
    DROPPED_LATE = "dropped_late"
    DROPPED_OVERFLOW = "dropped_overflow"
    DUPLICATE = "duplicate"


class JitterBuffer:
    """Fixed-delay playout buffer.

    A packet generated at ``g`` plays at ``g + playout_delay``. Arrivals after
    that deadline are late; arrivals that would stretch the buffered span of
    generation times beyond ``capacity`` overflow.
    """

    def __init__(self, playout_delay: int = PLAYOUT_DELAY, capacity: int = JITTER_CAPACITY):
        self.playout_delay = playout_delay
        self.capacity = capacity
        self.buffered: dict[int, int] = {}  # rtp seq -> generation time
        self.played = 0
        self.dropped_late = 0
        self.dropped_overflow = 0
        self.duplicates = 0
        self.arrivals = 0
        self.play_log: list[tuple[int, int]] = []  # (play time, seq)
        self._seen: set[int] = set()

    def _play_due(self, now: int) -> None:
        if not self.buffered:
            return
        delay = self.playout_delay
        due = [(g + delay, s) for s, g in self.buffered.items() if g + delay <= now]
        for t, s in sorted(due):
            del self.buffered[s]
            self.played += 1
            self.play_log.append((t, s))

    def insert(self, seq: int, generated_at: int, arrival: int) -> JitterOutcome:
        self.arrivals += 1
        self._play_due(arrival)
        if seq in self._seen:
            self.duplicates += 1
            return JitterOutcome.DUPLICATE
        self._seen.add(seq)
        if arrival > generated_at + self.playout_delay:
            self.dropped_late += 1
            return JitterOutcome.DROPPED_LATE
        if self.buffered:
            gens = self.buffered.values()
            span = max(max(gens), generated_at) - min(min(gens), generated_at)
            if span > self.capacity:
                self.dropped_overflow += 1
                return JitterOutcome.DROPPED_OVERFLOW
        self.buffered[seq] = generated_at
        return JitterOutcome.SCHEDULED_PLAY

    def flush(self) -> None:
        """Play everything still buffered (end of stream)."""
        self._play_due(float("inf"))

    @property
    def drops(self) -> int:
        return self.dropped_late + self.dropped_overflow

    def closure_holds(self) -> bool:
        return (self.played + len(self.buffered) + self.dropped_late + self.dropped_overflow
                + self.duplicates) == self.arrivals


def jitter_insert(jb: JitterBuffer, seq: int, generated_at: int, arrival: int) -> JitterOutcome:
    return jb.insert(seq, generated_at, arrival)


class Verdict(Enum):
    GOOD = "Good"
    POOR = "Poor"


@dataclass(frozen=True)
class QualityVerdict:
    loss_fraction: float
    verdict: Verdict


def classify_quality(loss_fraction: float) -> QualityVerdict:
    if not 0.0 <= loss_fraction <= 1.0:
        raise ValueError(f"loss fraction {loss_fraction} outside [0, 1]")
    return QualityVerdict(loss_fraction, Verdict.GOOD if loss_fraction < LOSS_THRESHOLD else Verdict.POOR)


@dataclass(frozen=True)
class DelayStats:
    mean_us: float
    max_us: int
    count: int

    @property
    def mean_ms(self) -> float:
        return self.mean_us / US_PER_MS

    @property
    def max_ms(self) -> float:
        return self.max_us / US_PER_MS


def e2e_delay_stats(delays_us: Iterable[int]) -> DelayStats | None:
    """Mean/max one-way delay; None when nothing was delivered."""
    total = 0
    peak = 0
    n = 0
    for d in delays_us:
        total += d
        n += 1
        if d > peak:
            peak = d
    if n == 0:
        return None
    return DelayStats(total / n, peak, n)


@dataclass
class RtpReceiver:
    """Receive side of one media direction."""

    flow_id: str
    jitter: JitterBuffer = field(default_factory=JitterBuffer)
    received: int = 0
    delays: list[int] = field(default_factory=list)
    arrival_times: list[int] = field(default_factory=list)

    def on_packet(self, pkt, now: int) -> JitterOutcome:
        self.received += 1
        self.delays.append(now - pkt.created_at)
        self.arrival_times.append(now)
        return self.jitter.insert(pkt.sequence_number, pkt.created_at, now)
