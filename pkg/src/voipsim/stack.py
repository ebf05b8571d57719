"""Packets with RTP/UDP/IP encapsulation, FIFO interface queues, static routing."""

from __future__ import annotations

import itertools
from collections import deque
from enum import Enum

import networkx as nx

RTP_HEADER = 12
UDP_HEADER = 8
IP_HEADER = 20
MTU = 1500
DEFAULT_QUEUE_CAPACITY = 50

_packet_ids = itertools.count()


class Packet:
    __slots__ = ("pid", "flow_id", "payload_bytes", "headers", "src_node", "dst_node",
                 "created_at", "enqueued_at", "dequeued_at", "delivered_at",
                 "sequence_number", "data", "next_hop", "holder")

    def __init__(self, payload_bytes, headers, flow_id=None, src_node=None, dst_node=None,
                 created_at=0, sequence_number=0, data=None):
        self.pid = next(_packet_ids)
        self.flow_id = flow_id
        self.payload_bytes = payload_bytes
        self.headers = headers
        self.src_node = src_node
        self.dst_node = dst_node
        self.created_at = created_at
        self.enqueued_at = None
        self.dequeued_at = None
        self.delivered_at = None
        self.sequence_number = sequence_number
        self.data = data
        self.next_hop = None
        self.holder = None

    @property
    def wire_bytes(self) -> int:
        return self.payload_bytes + sum(cost for _, cost in self.headers)

    def __repr__(self):
        return (f"Packet(flow={self.flow_id!r}, seq={self.sequence_number}, "
                f"{self.src_node}->{self.dst_node}, {self.wire_bytes}B)")


def encapsulate(payload_bytes: int, with_rtp: bool, **fields) -> Packet:
    if payload_bytes <= 0:
        raise ValueError("payload must be at least one byte")
    headers = ((("RTP", RTP_HEADER),) if with_rtp else ()) + (("UDP", UDP_HEADER), ("IP", IP_HEADER))
    pkt = Packet(payload_bytes, headers, **fields)
    if pkt.wire_bytes > MTU:
        raise ValueError(f"{pkt.wire_bytes}-byte packet exceeds the {MTU}-byte MTU")
    return pkt


class Enqueue(Enum):
    ACCEPTED = "accepted"
    DROPPED_FULL = "dropped_full"


class FifoQueue:
    """Bounded FIFO that tracks how long packets wait before being dequeued."""

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY):
        if capacity < 1:
            raise ValueError("queue capacity must be at least 1")
        self.capacity = capacity
        self._q: deque = deque()
        self.sum_wait = 0
        self.dequeues = 0
        self.drops_full = 0

    def __len__(self):
        return len(self._q)

    def __iter__(self):
        return iter(self._q)

    def enqueue(self, p: Packet, t: int) -> Enqueue:
        if len(self._q) >= self.capacity:
            self.drops_full += 1
            return Enqueue.DROPPED_FULL
        p.enqueued_at = t
        self._q.append(p)
        return Enqueue.ACCEPTED

    def dequeue(self, t: int) -> Packet:
        p = self._q.popleft()
        p.dequeued_at = t
        self.sum_wait += t - p.enqueued_at
        self.dequeues += 1
        return p

    @property
    def avg_wait(self) -> float | None:
        return self.sum_wait / self.dequeues if self.dequeues else None


def enqueue(q: FifoQueue, p: Packet, t: int) -> Enqueue:
    return q.enqueue(p, t)


class RoutingTable:
    """Static hop-count shortest paths computed once from the topology graph."""

    def __init__(self, graph: nx.Graph):
        self.graph = graph
        self._next: dict[int, dict[int, int]] = {}
        for src, paths in nx.all_pairs_shortest_path(graph):
            self._next[src] = {dst: (path[1] if len(path) > 1 else dst) for dst, path in paths.items()}

    @classmethod
    def from_links(cls, nodes, links) -> "RoutingTable":
        g = nx.Graph()
        g.add_nodes_from(sorted(nodes))
        g.add_edges_from(sorted(tuple(sorted(e)) for e in links))
        return cls(g)

    def next_hop(self, at_node: int, dst_node: int) -> int | None:
        """Next hop toward ``dst_node``; ``at_node`` itself means local delivery, None unreachable."""
        return self._next.get(at_node, {}).get(dst_node)

    def path(self, src: int, dst: int) -> list[int] | None:
        path = [src]
        while path[-1] != dst:
            nh = self.next_hop(path[-1], dst)
            if nh is None:
                return None
            path.append(nh)
        return path


def route_next_hop(table: RoutingTable, at_node: int, dst_node: int) -> int | None:
    return table.next_hop(at_node, dst_node)


class WiredLink:
    """Point-to-point lossless link: FIFO per direction, serialization + fixed latency."""

    def __init__(self, engine, a: int, b: int, rate_bps: int = 100_000_000,
                 latency_us: int = 10, capacity: int = DEFAULT_QUEUE_CAPACITY):
        self.engine = engine
        self.ends = (a, b)
        self.rate_bps = rate_bps
        self.latency_us = latency_us
        self.queues = {a: FifoQueue(capacity), b: FifoQueue(capacity)}
        self._busy = {a: False, b: False}
        self.in_transit: dict[int, Packet] = {}
        self.deliver = None  # callable(node_id, packet, from_node)

    def other(self, node: int) -> int:
        a, b = self.ends
        return b if node == a else a

    def serialization_us(self, nbytes: int) -> int:
        return -(-8 * nbytes * 1_000_000 // self.rate_bps)

    def send(self, from_node: int, pkt: Packet) -> Enqueue:
        q = self.queues[from_node]
        res = q.enqueue(pkt, self.engine.now)
        if res is Enqueue.ACCEPTED and not self._busy[from_node]:
            self._start(from_node)
        return res

    def _start(self, from_node):
        q = self.queues[from_node]
        pkt = q.dequeue(self.engine.now)
        self._busy[from_node] = True
        self.in_transit[pkt.pid] = pkt
        tx = self.serialization_us(pkt.wire_bytes)
        self.engine.after(tx, self._tx_done, from_node, kind="wire.tx_done", target=self.ends)
        self.engine.after(tx + self.latency_us, self._arrive, from_node, pkt,
                          kind="wire.arrive", target=self.ends)

    def _tx_done(self, from_node):
        self._busy[from_node] = False
        if self.queues[from_node]:
            self._start(from_node)

    def _arrive(self, from_node, pkt):
        del self.in_transit[pkt.pid]
        self.deliver(self.other(from_node), pkt, from_node)

    def resident_packets(self):
        for q in self.queues.values():
            yield from q
        yield from self.in_transit.values()
