"""802.11 DCF (basic access) over a shared channel, and Bianchi's saturation model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import Engine, RngStream, seconds
from .radio import ACK_FRAME_BYTES, PhyProfile, ack_duration, transmit_duration
from .stack import DEFAULT_QUEUE_CAPACITY, Enqueue, FifoQueue, Packet

MAC_HEADER = 24
MAC_FCS = 4
MAC_OVERHEAD = MAC_HEADER + MAC_FCS
BROADCAST = -1
DEFAULT_RETRY_LIMIT = 7

DATA = "data"
ACK = "ack"


class MacFrame:
    __slots__ = ("kind", "src", "dst", "packet", "body_bytes", "retry_count", "frame_seq",
                 "enqueued_at", "rate", "duration")

    def __init__(self, kind, src, dst, packet=None, body_bytes=0, frame_seq=0, enqueued_at=0):
        self.kind = kind
        self.src = src
        self.dst = dst
        self.packet = packet
        self.body_bytes = body_bytes
        self.retry_count = 0
        self.frame_seq = frame_seq
        self.enqueued_at = enqueued_at
        self.rate = 0
        self.duration = 0

    @property
    def on_air_bytes(self) -> int:
        if self.kind == ACK:
            return ACK_FRAME_BYTES
        return self.body_bytes + MAC_OVERHEAD

    def __repr__(self):
        return f"MacFrame({self.kind} {self.src}->{self.dst} seq={self.frame_seq} retry={self.retry_count})"


class Medium:
    """One radio channel. Every attached interface senses frames whose received
    power clears the lowest-rate sensitivity; overlapping receptions collide."""

    def __init__(self, engine: Engine, phy: PhyProfile, index: int = 0):
        self.engine = engine
        self.phy = phy
        self.index = index
        self.ifaces: dict[int, "DcfMac"] = {}
        self.rx_power: dict[tuple[int, int], float] = {}
        self.link_rate: dict[tuple[int, int], int | None] = {}
        self.sense_threshold = min(phy.rx_sensitivity.values())
        self.transmissions = 0

    def attach(self, mac: "DcfMac") -> None:
        self.ifaces[mac.node_id] = mac

    def set_rx_power(self, src: int, dst: int, dbm: float) -> None:
        from .radio import best_rate
        self.rx_power[(src, dst)] = dbm
        self.link_rate[(src, dst)] = best_rate(dbm, self.phy)

    def data_rate(self, src: int, dst: int) -> int:
        if dst == BROADCAST:
            return min(self.phy.rates)
        rate = self.link_rate.get((src, dst))
        return rate if rate is not None else min(self.phy.rates)

    def transmit(self, sender: "DcfMac", frame: MacFrame) -> None:
        self.transmissions += 1
        heard = []
        src = sender.node_id
        for nid, other in self.ifaces.items():
            if other is sender:
                continue
            p = self.rx_power.get((src, nid), -math.inf)
            if p >= self.sense_threshold:
                heard.append((other, p))
                other._rx_start(frame)
        self.engine.after(frame.duration, self._end, sender, frame, heard,
                          kind="phy.tx_end", target=src)

    def _end(self, sender, frame, heard):
        sender._tx_end(frame)
        for other, p in heard:
            other._rx_end(frame, p)


class DcfMac:
    """Per-interface DCF state machine.

    Backoff slot boundaries are aligned to the instant the medium last became
    idle plus DIFS, so stations that pick the same residual count transmit in
    the same microsecond and collide.
    """

    def __init__(self, engine: Engine, medium: Medium, node_id: int, rng: RngStream,
                 queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
                 retry_limit: int = DEFAULT_RETRY_LIMIT):
        self.engine = engine
        self.medium = medium
        self.phy = phy = medium.phy
        self.node_id = node_id
        self.rng = rng
        self.queue = FifoQueue(queue_capacity)
        self.retry_limit = retry_limit
        self.cw = phy.cw_min
        self.backoff: int | None = None
        self.nav_until = 0
        self.current: MacFrame | None = None

        self._slot = phy.slot_time
        self._difs = phy.difs
        self._sifs = phy.sifs
        self._ack_dur = ack_duration(phy)
        self.ack_timeout = phy.sifs + self._ack_dur + phy.slot_time

        self.busy = 0
        self.transmitting = False
        self.awaiting_ack = False
        self._ack_owed = False
        self.idle_since = 0
        self._count_begin = 0
        self._tx_event = None
        self._ack_timer = None
        self._arriving: dict[MacFrame, bool] = {}
        self._next_seq = 0
        self._last_seq_from: dict[int, int] = {}

        self.retx_ack_timeout = 0
        self.frames_sent = 0
        self.frames_received = 0
        self.frames_dropped_retry = 0
        self.frames_acked = 0
        self.frames_enqueued = 0
        self.collisions_seen = 0

        # Upper-layer hooks.
        self.on_deliver = lambda packet, src: None
        self.on_drop = lambda packet: None
        self.on_success = lambda packet: None
        medium.attach(self)

    # -- upper interface -------------------------------------------------

    def enqueue(self, packet: Packet, next_hop: int) -> Enqueue:
        packet.next_hop = next_hop
        res = self.queue.enqueue(packet, self.engine.now)
        if res is Enqueue.ACCEPTED:
            self.frames_enqueued += 1
            self._kick()
        return res

    @property
    def frames_in_flight(self) -> int:
        return len(self.queue) + (1 if self.current is not None else 0)

    def resident_packets(self):
        cur = self.current
        # Skip a frame the next hop already took (only its ACK went missing).
        if cur is not None and cur.packet.holder == self.node_id:
            yield cur.packet
        yield from self.queue

    # -- channel access --------------------------------------------------

    def _kick(self) -> None:
        if self.transmitting or self.awaiting_ack or self._ack_owed or self._tx_event is not None:
            return
        if self.current is None:
            if not self.queue:
                return
            now = self.engine.now
            pkt = self.queue.dequeue(now)
            self.current = MacFrame(DATA, self.node_id, pkt.next_hop, pkt, pkt.wire_bytes,
                                    self._next_seq, pkt.enqueued_at)
            self._next_seq += 1
            self.backoff = self.rng.uniform_int(0, self.cw)
        if self.busy:
            return
        now = self.engine.now
        start = max(self.idle_since, self.nav_until) + self._difs
        if now > start:
            slot = self._slot
            start += -(-(now - start) // slot) * slot
        self._count_begin = start
        self._tx_event = self.engine.schedule(start + self.backoff * self._slot, self._fire,
                                              kind="mac.backoff_done", target=self.node_id)

    def _medium_busy(self) -> None:
        ev = self._tx_event
        if ev is None:
            return
        now = self.engine.now
        if ev.fire_at == now and not self.transmitting:
            # Same slot boundary as the other sender: cannot sense it in time.
            return
        self.engine.cancel(ev)
        self._tx_event = None
        if now > self._count_begin:
            elapsed = (now - self._count_begin) // self._slot
            self.backoff -= min(elapsed, self.backoff)

    def _medium_idle(self) -> None:
        self.idle_since = self.engine.now
        self._kick()

    def _fire(self) -> None:
        self._tx_event = None
        frame = self.current
        frame.rate = self.medium.data_rate(self.node_id, frame.dst)
        frame.duration = transmit_duration(frame.on_air_bytes, frame.rate, self.phy)
        self.backoff = None
        self.frames_sent += 1
        self._start_tx(frame)

    def _start_tx(self, frame: MacFrame) -> None:
        if self._arriving:
            for f in self._arriving:
                self._arriving[f] = True
        was_idle = self.busy == 0
        self.transmitting = True
        if was_idle:
            self._medium_busy()
        self.medium.transmit(self, frame)

    def _tx_end(self, frame: MacFrame) -> None:
        self.transmitting = False
        if frame.kind == DATA:
            if frame.dst == BROADCAST:
                self._success()
            else:
                self.awaiting_ack = True
                self._ack_timer = self.engine.after(self.ack_timeout, self._on_ack_timeout,
                                                    kind="mac.ack_timeout", target=self.node_id)
        if self.busy == 0:
            self._medium_idle()

    # -- reception -------------------------------------------------------

    def _rx_start(self, frame: MacFrame) -> None:
        self.busy += 1
        arriving = self._arriving
        corrupted = self.transmitting or bool(arriving)
        if arriving:
            self.collisions_seen += 1
            for f in arriving:
                arriving[f] = True
        arriving[frame] = corrupted
        if self.busy == 1 and not self.transmitting:
            self._medium_busy()

    def _rx_end(self, frame: MacFrame, power: float) -> None:
        corrupted = self._arriving.pop(frame)
        self.busy -= 1
        if self.busy == 0 and not self.transmitting:
            self.idle_since = self.engine.now  # before decode: upper layers may enqueue
        if not corrupted and power >= self.phy.rx_sensitivity[frame.rate]:
            self._decode(frame)
        if self.busy == 0 and not self.transmitting:
            self._medium_idle()

    def _decode(self, frame: MacFrame) -> None:
        if frame.dst == self.node_id:
            if frame.kind == ACK:
                cur = self.current
                if self.awaiting_ack and cur is not None and frame.frame_seq == cur.frame_seq:
                    self._success()
                return
            self._ack_owed = True
            self.engine.after(self._sifs, self._send_ack, frame.src, frame.frame_seq,
                              kind="mac.send_ack", target=self.node_id)
            if self._last_seq_from.get(frame.src) == frame.frame_seq:
                return  # retransmission of a frame already passed up
            self._last_seq_from[frame.src] = frame.frame_seq
            self.frames_received += 1
            self.on_deliver(frame.packet, frame.src)
        elif frame.dst == BROADCAST:
            self.frames_received += 1
            self.on_deliver(frame.packet, frame.src)
        elif frame.kind == DATA:
            nav = self.engine.now + self._sifs + self._ack_dur
            if nav > self.nav_until:
                self.nav_until = nav

    def _send_ack(self, dst: int, seq: int) -> None:
        self._ack_owed = False
        ack = MacFrame(ACK, self.node_id, dst, frame_seq=seq)
        ack.rate = self.phy.control_rate
        ack.duration = self._ack_dur
        self._start_tx(ack)

    # -- outcome ---------------------------------------------------------

    def _success(self) -> None:
        self.engine.cancel(self._ack_timer)
        self._ack_timer = None
        self.awaiting_ack = False
        self.frames_acked += 1
        self.cw = self.phy.cw_min
        frame = self.current
        self.current = None
        self.backoff = None
        self.on_success(frame.packet)

    def _on_ack_timeout(self) -> None:
        self._ack_timer = None
        self.awaiting_ack = False
        self.retx_ack_timeout += 1
        frame = self.current
        frame.retry_count += 1
        if frame.retry_count > self.retry_limit:
            self.frames_dropped_retry += 1
            self.cw = self.phy.cw_min
            self.current = None
            self.backoff = None
            self.on_drop(frame.packet)
        else:
            self.cw = min(2 * (self.cw + 1) - 1, self.phy.cw_max)
            self.backoff = self.rng.uniform_int(0, self.cw)
        if self.busy == 0 and not self.transmitting:
            self._kick()


def start_transmission(mac: DcfMac, packet: Packet, next_hop: int) -> Enqueue:
    return mac.enqueue(packet, next_hop)


# ---------------------------------------------------------------------------
# Analytical saturation throughput


@dataclass(frozen=True)
class BianchiResult:
    tau: float
    p: float
    throughput: float


def bianchi_fixed_point(n: int, w: int, m: int, tol: float = 1e-10) -> tuple[float, float]:
    """Solve tau = 2 / (1 + W + p W sum_{i<m} (2p)^i), p = 1 - (1 - tau)^(n-1).

    The sum form equals the textbook ratio (1-(2p)^m)/(1-2p) but has no
    removable singularity at p = 1/2.
    """
    if n < 1:
        raise ValueError("need at least one station")

    def tau_of(p: float) -> float:
        return 2.0 / (1.0 + w + p * w * sum((2.0 * p) ** i for i in range(m)))

    if n == 1:
        return tau_of(0.0), 0.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = mid - tau_of(1.0 - (1.0 - mid) ** (n - 1))
        if g > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            tau = 0.5 * (lo + hi)
            return tau, 1.0 - (1.0 - tau) ** (n - 1)
    raise ArithmeticError("fixed point did not converge")


def bianchi_saturation_throughput(n: int, phy: PhyProfile, payload_bytes: int,
                                  rate: int | None = None) -> BianchiResult:
    """Normalized saturation throughput of basic-access DCF with n stations."""
    rate = rate or phy.max_rate
    w = phy.cw_min + 1
    m = round(math.log2((phy.cw_max + 1) / w))
    tau, p = bianchi_fixed_point(n, w, m)
    p_tr = 1.0 - (1.0 - tau) ** n
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    payload_time = 8.0 * payload_bytes * 1e6 / rate
    frame_time = transmit_duration(payload_bytes + MAC_OVERHEAD, rate, phy)
    t_s = frame_time + phy.sifs + ack_duration(phy) + phy.difs
    t_c = frame_time + phy.difs
    s = (p_s * p_tr * payload_time
         / ((1.0 - p_tr) * phy.slot_time + p_tr * p_s * t_s + p_tr * (1.0 - p_s) * t_c))
    return BianchiResult(tau, p, s)


# ---------------------------------------------------------------------------
# Saturated single-cell fixture (no upper layers)


@dataclass
class SaturationResult:
    throughput: float
    successes: list[int]
    attempts: int
    retransmissions: int
    duration_us: int


def simulate_saturation(n: int, phy: PhyProfile, payload_bytes: int, duration_s: float = 20.0,
                        seed: int = 1, rate: int | None = None) -> SaturationResult:
    """n always-backlogged stations sending to one sink, all in mutual range."""
    from .stack import Packet

    engine = Engine(seed)
    medium = Medium(engine, phy)
    sink_id = 0
    ids = list(range(n + 1))
    macs = {}
    for nid in ids:
        macs[nid] = DcfMac(engine, medium, nid, engine.rng(f"mac.backoff.node{nid}"))
    rx = phy.rx_sensitivity[rate or phy.max_rate] + 10.0
    for a in ids:
        for b in ids:
            if a != b:
                medium.set_rx_power(a, b, rx)
    if rate is not None:
        for key in medium.link_rate:
            medium.link_rate[key] = rate

    successes = [0] * (n + 1)

    def refill(nid):
        mac = macs[nid]
        while len(mac.queue) < 2:
            mac.enqueue(Packet(payload_bytes, ()), sink_id)

    for nid in ids[1:]:
        def on_success(packet, nid=nid):
            successes[nid] += 1
            refill(nid)
        macs[nid].on_success = on_success
        macs[nid].on_drop = lambda packet, nid=nid: refill(nid)
        refill(nid)

    horizon = seconds(duration_s)
    engine.run_until(horizon)
    used_rate = rate or phy.max_rate
    payload_time = 8.0 * payload_bytes * 1e6 / used_rate
    total = sum(successes)
    return SaturationResult(
        throughput=total * payload_time / horizon,
        successes=successes[1:],
        attempts=sum(m.frames_sent for m in macs.values()),
        retransmissions=sum(m.retx_ack_timeout for m in macs.values()),
        duration_us=horizon,
    )
