"""Nodes, interfaces and per-flow packet accounting."""

from __future__ import annotations

from collections import defaultdict

from .engine import Engine
from .mac import DcfMac, Medium
from .stack import Enqueue, Packet, RoutingTable, WiredLink

DROP_CATEGORIES = ("queue", "mac", "routing")


class FlowCounters:
    __slots__ = ("sent", "delivered", "dropped_queue", "dropped_mac", "dropped_routing")

    def __init__(self):
        self.sent = 0
        self.delivered = 0
        self.dropped_queue = 0
        self.dropped_mac = 0
        self.dropped_routing = 0

    @property
    def dropped(self) -> int:
        return self.dropped_queue + self.dropped_mac + self.dropped_routing


class FlowStats:
    def __init__(self):
        self.flows: dict[str, FlowCounters] = defaultdict(FlowCounters)

    def sent(self, pkt: Packet) -> None:
        self.flows[pkt.flow_id].sent += 1

    def delivered(self, pkt: Packet) -> None:
        self.flows[pkt.flow_id].delivered += 1

    def dropped(self, pkt: Packet, category: str) -> None:
        c = self.flows[pkt.flow_id]
        setattr(c, f"dropped_{category}", getattr(c, f"dropped_{category}") + 1)


class Node:
    def __init__(self, net: "Network", node_id: int):
        self.net = net
        self.id = node_id
        self.engine = net.engine
        self.ports: dict[int, object] = {}
        self.macs: dict[int, DcfMac] = {}  # channel index -> MAC
        self._iface_for: dict[int, tuple[str, object]] = {}
        self.unclaimed = 0

    def __repr__(self):
        return f"Node({self.id})"

    def bind(self, port: int, handler) -> None:
        self.ports[port] = handler

    def send(self, pkt: Packet) -> None:
        self.net.stats.sent(pkt)
        self._route(pkt)

    def receive(self, pkt: Packet, from_node: int) -> None:
        self._route(pkt)

    def _route(self, pkt: Packet) -> None:
        pkt.holder = self.id
        if pkt.dst_node == self.id:
            self._deliver(pkt)
            return
        nh = self.net.routing.next_hop(self.id, pkt.dst_node)
        iface = self._iface_for.get(nh) if nh is not None else None
        if iface is None:
            self.net.stats.dropped(pkt, "routing")
            return
        kind, obj = iface
        if kind == "mac":
            res = obj.enqueue(pkt, nh)
        else:
            res = obj.send(self.id, pkt)
        if res is Enqueue.DROPPED_FULL:
            self.net.stats.dropped(pkt, "queue")

    def _deliver(self, pkt: Packet) -> None:
        pkt.delivered_at = self.engine.now
        self.net.stats.delivered(pkt)
        handler = self.ports.get(pkt.data[0]) if pkt.data else None
        if handler is None:
            self.unclaimed += 1
        else:
            handler(pkt)

    def _on_mac_drop(self, pkt: Packet) -> None:
        # The next hop may already hold the packet if only the ACK was lost.
        if pkt.holder == self.id:
            self.net.stats.dropped(pkt, "mac")


class Network:
    def __init__(self, engine: Engine):
        self.engine = engine
        self.nodes: dict[int, Node] = {}
        self.media: dict[int, Medium] = {}
        self.links: list[WiredLink] = []
        self.stats = FlowStats()
        self.routing: RoutingTable | None = None
        self._edges: set[tuple[int, int]] = set()

    def add_node(self, node_id: int) -> Node:
        node = self.nodes[node_id] = Node(self, node_id)
        return node

    def add_medium(self, index: int, phy) -> Medium:
        m = self.media[index] = Medium(self.engine, phy, index)
        return m

    def attach_wireless(self, node_id: int, channel: int, queue_capacity: int, retry_limit: int) -> DcfMac:
        node = self.nodes[node_id]
        medium = self.media[channel]
        mac = DcfMac(self.engine, medium, node_id,
                     self.engine.rng(f"mac.backoff.ch{channel}.node{node_id}"),
                     queue_capacity=queue_capacity, retry_limit=retry_limit)
        mac.on_deliver = node.receive
        mac.on_drop = node._on_mac_drop
        node.macs[channel] = mac
        for other_id in medium.ifaces:
            if other_id != node_id:
                self._connect(node_id, other_id, ("mac", mac))
                other_mac = self.nodes[other_id].macs[channel]
                self._connect(other_id, node_id, ("mac", other_mac))
        return mac

    def add_wired_link(self, a: int, b: int, **kw) -> WiredLink:
        link = WiredLink(self.engine, a, b, **kw)
        link.deliver = lambda node_id, pkt, frm: self.nodes[node_id].receive(pkt, frm)
        self.links.append(link)
        self._connect(a, b, ("wire", link))
        self._connect(b, a, ("wire", link))
        return link

    def _connect(self, a: int, b: int, iface) -> None:
        self.nodes[a]._iface_for.setdefault(b, iface)
        self._edges.add((min(a, b), max(a, b)))

    def build_routes(self) -> RoutingTable:
        self.routing = RoutingTable.from_links(self.nodes, self._edges)
        return self.routing

    def all_macs(self):
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            for ch in sorted(node.macs):
                yield node.macs[ch]

    def all_queues(self):
        for mac in self.all_macs():
            yield mac.queue
        for link in self.links:
            for end in link.ends:
                yield link.queues[end]

    def resident_packets(self):
        for mac in self.all_macs():
            yield from mac.resident_packets()
        for link in self.links:
            yield from link.resident_packets()

    def in_flight_by_flow(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for pkt in self.resident_packets():
            counts[pkt.flow_id] += 1
        return dict(counts)
