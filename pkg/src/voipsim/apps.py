"""Background traffic: constant-bit-rate UDP and a windowed reliable bulk transfer."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import US_PER_MS, US_PER_S
from .stack import encapsulate
from .voip import e2e_delay_stats

CBR_PORT = 9000
FTP_DATA_PORT = 20
FTP_CTRL_PORT = 21
FTP_CONTROL_BYTES = 40

DEFAULT_WINDOW = 4
DEFAULT_CHUNK = 1460
DEFAULT_RTO = 200 * US_PER_MS
DEFAULT_ITEM = 25_000_000
BUCKET = US_PER_S


def throughput_series(deliveries, bucket: int = BUCKET, start: int = 0,
                      end: int | None = None) -> list[tuple[int, float]]:
    """Bin (t_us, payload_bytes) records into (bucket start, bits/s); empty buckets are 0."""
    if bucket <= 0:
        raise ValueError("bucket must be positive")
    deliveries = list(deliveries)
    if end is None:
        end = max((t for t, _ in deliveries), default=start) + 1
    n = max(0, -(-(end - start) // bucket))
    bins = [0] * n
    for t, nbytes in deliveries:
        if start <= t < end:
            bins[(t - start) // bucket] += nbytes
    scale = 8 * US_PER_S / bucket
    return [(start + i * bucket, b * scale) for i, b in enumerate(bins)]


@dataclass
class CbrFlow:
    flow_id: str
    src: int
    dst: int
    payload_bytes: int = 512
    interval: int = 20 * US_PER_MS
    start_at: int = 50 * US_PER_S
    stop_at: int = 130 * US_PER_S
    sent: int = 0
    departures: list[int] = field(default_factory=list)
    arrivals: list[tuple[int, int]] = field(default_factory=list)  # (t, payload bytes)
    delays: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.start_at < self.stop_at:
            raise ValueError(f"CBR flow {self.flow_id}: start must precede stop")

    @property
    def received(self) -> int:
        return len(self.arrivals)

    def delay_stats(self):
        return e2e_delay_stats(self.delays)

    def mean_throughput_bps(self) -> float:
        return 8 * sum(b for _, b in self.arrivals) * US_PER_S / (self.stop_at - self.start_at)


class CbrApp:
    def __init__(self, engine, src_node, dst_node, flow: CbrFlow):
        self.engine = engine
        self.src = src_node
        self.flow = flow
        self._k = 0
        dst_node.bind(CBR_PORT, self._on_packet)
        engine.schedule(flow.start_at, self._emit, kind="cbr.send", target=flow.flow_id)

    def _emit(self):
        f = self.flow
        now = self.engine.now
        pkt = encapsulate(f.payload_bytes, False, flow_id=f.flow_id, src_node=f.src,
                          dst_node=f.dst, created_at=now, sequence_number=self._k,
                          data=(CBR_PORT, None))
        self._k += 1
        f.sent += 1
        f.departures.append(now)
        self.src.send(pkt)
        nxt = f.start_at + self._k * f.interval
        if nxt < f.stop_at:
            self.engine.schedule(nxt, self._emit, kind="cbr.send", target=f.flow_id)

    def _on_packet(self, pkt):
        now = self.engine.now
        self.flow.arrivals.append((now, pkt.payload_bytes))
        self.flow.delays.append(now - pkt.created_at)


def run_cbr(engine, src_node, dst_node, flow: CbrFlow) -> CbrApp:
    return CbrApp(engine, src_node, dst_node, flow)


@dataclass
class FtpFlow:
    """Client ``src`` fetches ``item_bytes`` from server ``dst``."""

    flow_id: str
    src: int
    dst: int
    item_bytes: int = DEFAULT_ITEM
    window: int = DEFAULT_WINDOW
    chunk_bytes: int = DEFAULT_CHUNK
    rto: int = DEFAULT_RTO
    start_at: int = 0
    bytes_acked: int = 0
    bytes_received: int = 0
    retransmissions: int = 0
    completed_at: int | None = None
    server_log: list[tuple[int, int]] = field(default_factory=list)  # chunk bytes sent
    client_log: list[tuple[int, int]] = field(default_factory=list)  # new bytes received

    def __post_init__(self):
        if self.item_bytes <= 0:
            raise ValueError(f"FTP flow {self.flow_id}: item size must be positive")

    @property
    def n_chunks(self) -> int:
        return -(-self.item_bytes // self.chunk_bytes)

    def chunk_size(self, k: int) -> int:
        if k == self.n_chunks - 1:
            return self.item_bytes - k * self.chunk_bytes
        return self.chunk_bytes

    @property
    def complete(self) -> bool:
        return self.completed_at is not None


class FtpApp:
    """Request, then the server streams chunks with at most ``window`` unacknowledged;
    each chunk is acknowledged individually and retransmitted on its own timer."""

    def __init__(self, engine, client_node, server_node, flow: FtpFlow):
        self.engine = engine
        self.client = client_node
        self.server = server_node
        self.flow = flow
        self._outstanding: dict[int, object] = {}
        self._next_chunk = 0
        self._started = False
        self._got: set[int] = set()
        self._req_timer = None
        self._data_flow = f"{flow.flow_id}:data"
        self._ctrl_flow = f"{flow.flow_id}:ctrl"
        port = FTP_DATA_PORT + 100 * len(client_node.ports)
        self._client_port = port
        client_node.bind(port, self._client_rx)
        self._server_port = FTP_CTRL_PORT + 100 * len(server_node.ports)
        server_node.bind(self._server_port, self._server_rx)
        engine.schedule(flow.start_at, self._request, kind="ftp.request", target=flow.flow_id)

    # client side

    def _ctrl(self, what, k=None):
        f = self.flow
        pkt = encapsulate(FTP_CONTROL_BYTES, False, flow_id=self._ctrl_flow, src_node=f.src,
                          dst_node=f.dst, created_at=self.engine.now,
                          data=(self._server_port, (what, k)))
        self.client.send(pkt)

    def _request(self):
        self._req_timer = None
        if self._got:
            return
        self._ctrl("get")
        self._req_timer = self.engine.after(self.flow.rto, self._request,
                                            kind="ftp.request_timeout", target=self.flow.flow_id)

    def _client_rx(self, pkt):
        k = pkt.data[1]
        f = self.flow
        if k not in self._got:
            self._got.add(k)
            size = f.chunk_size(k)
            f.bytes_received += size
            f.client_log.append((self.engine.now, size))
        self._ctrl("ack", k)

    # server side

    def _server_rx(self, pkt):
        what, k = pkt.data[1]
        if what == "get":
            if not self._started:
                self._started = True
                self._fill()
            return
        timer = self._outstanding.pop(k, None)
        if timer is None:
            return
        self.engine.cancel(timer)
        f = self.flow
        f.bytes_acked += f.chunk_size(k)
        if f.bytes_acked == f.item_bytes:
            f.completed_at = self.engine.now
        self._fill()

    def _fill(self):
        f = self.flow
        while len(self._outstanding) < f.window and self._next_chunk < f.n_chunks:
            k = self._next_chunk
            self._next_chunk += 1
            self._send_chunk(k)

    def _send_chunk(self, k):
        f = self.flow
        now = self.engine.now
        size = f.chunk_size(k)
        pkt = encapsulate(size, False, flow_id=self._data_flow, src_node=f.dst, dst_node=f.src,
                          created_at=now, sequence_number=k, data=(self._client_port, k))
        f.server_log.append((now, size))
        self._outstanding[k] = self.engine.after(f.rto, self._timeout, k,
                                                 kind="ftp.chunk_timeout", target=f.flow_id)
        self.server.send(pkt)

    def _timeout(self, k):
        if k not in self._outstanding:
            return
        self.flow.retransmissions += 1
        self._send_chunk(k)


def run_ftp(engine, client_node, server_node, flow: FtpFlow) -> FtpApp:
    return FtpApp(engine, client_node, server_node, flow)
