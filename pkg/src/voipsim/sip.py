"""SIP entities: dialog state machine, user agents, registrar and proxy.

Messages are structured records carried as UDP payloads; nothing is parsed.
"""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from enum import Enum

from .engine import US_PER_MS, US_PER_S
from .stack import encapsulate
from .voip import RtpReceiver, RtpSender

SIP_PORT = 5060
REQUEST_BYTES = 500
RESPONSE_BYTES = 300
RETRANSMIT_INTERVAL = 500 * US_PER_MS
MAX_ATTEMPTS = 7
RING_DELAY = 2 * US_PER_S

REQUEST_KINDS = ("REGISTER", "INVITE", "ACK", "BYE", "CANCEL")


class IllegalTransition(RuntimeError):
    pass


class DialogState(Enum):
    IDLE = "Idle"
    REGISTERING = "Registering"
    INVITING = "Inviting"
    RINGING = "Ringing"
    ESTABLISHED = "Established"
    TERMINATING = "Terminating"
    TERMINATED = "Terminated"
    CANCELLED = "Cancelled"


class DialogEvent(Enum):
    INVITE_SENT = "invite_sent"
    PROVISIONAL = "provisional"
    ANSWERED = "answered"
    BYE_SENT = "bye_sent"
    BYE_CONFIRMED = "bye_confirmed"
    CANCEL_SENT = "cancel_sent"
    FAILED = "failed"


S, E = DialogState, DialogEvent
TRANSITIONS: dict[tuple[DialogState, DialogEvent], DialogState] = {
    (S.IDLE, E.INVITE_SENT): S.INVITING,
    (S.INVITING, E.PROVISIONAL): S.RINGING,
    (S.INVITING, E.ANSWERED): S.ESTABLISHED,
    (S.RINGING, E.ANSWERED): S.ESTABLISHED,
    (S.ESTABLISHED, E.BYE_SENT): S.TERMINATING,
    (S.TERMINATING, E.BYE_CONFIRMED): S.TERMINATED,
    (S.INVITING, E.CANCEL_SENT): S.CANCELLED,
    (S.RINGING, E.CANCEL_SENT): S.CANCELLED,
    (S.INVITING, E.FAILED): S.TERMINATED,
    (S.RINGING, E.FAILED): S.TERMINATED,
    (S.TERMINATING, E.FAILED): S.TERMINATED,
}
LEGAL_EDGES = frozenset((src, dst) for (src, _), dst in TRANSITIONS.items())
del S, E


@dataclass
class SipDialog:
    call_id: str
    initiator: int
    receiver: int
    state: DialogState = DialogState.IDLE
    invite_sent_at: int | None = None
    established_at: int | None = None
    bye_at: int | None = None
    ended_at: int | None = None
    failure: str | None = None
    history: list[tuple[int, DialogState, DialogEvent, DialogState]] = field(default_factory=list)

    def apply(self, event: DialogEvent, t: int) -> DialogState:
        nxt = TRANSITIONS.get((self.state, event))
        if nxt is None:
            raise IllegalTransition(f"{self.call_id}: {event.value} not allowed in state {self.state.value}")
        self.history.append((t, self.state, event, nxt))
        self.state = nxt
        if event is DialogEvent.INVITE_SENT:
            self.invite_sent_at = t
        elif event is DialogEvent.ANSWERED:
            self.established_at = t
        elif event is DialogEvent.BYE_SENT:
            self.bye_at = t
        elif nxt in (DialogState.TERMINATED, DialogState.CANCELLED):
            self.ended_at = t
        return nxt


@dataclass(frozen=True)
class SipMessage:
    kind: str  # one of REQUEST_KINDS or "RESPONSE"
    call_id: str
    from_ua: str
    to_ua: str
    response_code: int | None = None
    cseq_kind: str | None = None  # request a response answers
    contact: int | None = None  # redirect target node
    via_proxy: bool = False

    def __post_init__(self):
        if self.kind == "RESPONSE":
            if self.response_code is None:
                raise ValueError("a response needs a status code")
        elif self.kind in REQUEST_KINDS:
            if self.response_code is not None:
                raise ValueError("requests carry no status code")
        else:
            raise ValueError(f"unknown SIP message kind {self.kind!r}")

    @property
    def is_request(self) -> bool:
        return self.kind != "RESPONSE"

    @property
    def body_bytes(self) -> int:
        return REQUEST_BYTES if self.is_request else RESPONSE_BYTES

    def payload(self) -> tuple:
        """Everything except routing metadata."""
        return (self.kind, self.call_id, self.from_ua, self.to_ua, self.response_code,
                self.cseq_kind, self.contact)


def user_of(node_id: int) -> str:
    return f"user{node_id}"


def node_of(user: str) -> int:
    return int(user.removeprefix("user"))


@dataclass
class RegistrarBinding:
    user: str
    node: int
    registered_at: int


class Registrar:
    def __init__(self):
        self.bindings: dict[str, RegistrarBinding] = {}

    def bind(self, user: str, node: int, t: int) -> RegistrarBinding:
        b = self.bindings[user] = RegistrarBinding(user, node, t)
        return b

    def lookup(self, user: str) -> RegistrarBinding | None:
        return self.bindings.get(user)


class _Transaction:
    """Retransmits one request on the endpoint's interval until stopped or exhausted."""

    def __init__(self, ua: "UserAgent", msg: SipMessage, dst: int, on_exhausted=None):
        self.ua = ua
        self.msg = msg
        self.dst = dst
        self.attempts = 0
        self.on_exhausted = on_exhausted
        self._timer = None
        self.done = False
        self._send()

    def _send(self):
        self.attempts += 1
        self.ua.transmit(self.msg, self.dst)
        self._timer = self.ua.engine.after(self.ua.retransmit_interval, self._expire,
                                           kind="sip.retransmit", target=self.msg.call_id)

    def _expire(self):
        self._timer = None
        if self.done:
            return
        if self.attempts >= self.ua.max_attempts:
            self.done = True
            self.ua.signaling_failures += 1
            if self.on_exhausted:
                self.on_exhausted()
            return
        self.ua.retransmissions += 1
        self._send()

    def stop(self):
        self.done = True
        self.ua.engine.cancel(self._timer)
        self._timer = None


class SipEndpoint:
    """Common transport plumbing for UAs and the proxy."""

    def __init__(self, engine, node):
        self.engine = engine
        self.node = node
        self.messages_sent = 0
        self.messages_received = 0
        self.retransmit_interval = RETRANSMIT_INTERVAL
        self.max_attempts = MAX_ATTEMPTS
        node.bind(SIP_PORT, self._on_packet)

    def transmit(self, msg: SipMessage, dst: int) -> None:
        pkt = encapsulate(msg.body_bytes, False, flow_id=f"sip:{msg.call_id}",
                          src_node=self.node.id, dst_node=dst, created_at=self.engine.now,
                          data=(SIP_PORT, msg))
        self.messages_sent += 1
        self.node.send(pkt)

    def _on_packet(self, pkt) -> None:
        self.messages_received += 1
        self.handle(pkt.data[1], pkt.src_node)

    def handle(self, msg: SipMessage, src: int) -> None:
        raise NotImplementedError


class SipProxy(SipEndpoint):
    """Stateless-forwarding proxy co-located with the registrar.

    Users listed in ``redirect_users`` get a 302 with their contact instead of
    having the INVITE relayed.
    """

    def __init__(self, engine, node, registrar: Registrar | None = None, redirect_users=()):
        super().__init__(engine, node)
        self.registrar = registrar or Registrar()
        self.redirect_users = set(redirect_users)
        self.routes: dict[str, tuple[int, int]] = {}
        self.forwarded: list[tuple[SipMessage, SipMessage]] = []

    def _reply(self, req: SipMessage, code: int, dst: int, contact: int | None = None):
        self.transmit(SipMessage("RESPONSE", req.call_id, req.from_ua, req.to_ua, code,
                                 req.kind, contact, via_proxy=True), dst)

    def _forward(self, msg: SipMessage, dst: int):
        out = dataclasses.replace(msg, via_proxy=True)
        self.forwarded.append((msg, out))
        self.transmit(out, dst)

    def handle(self, msg: SipMessage, src: int) -> None:
        now = self.engine.now
        if msg.kind == "REGISTER":
            self.registrar.bind(msg.from_ua, src, now)
            self._reply(msg, 200, src)
            return
        if msg.kind == "INVITE" and msg.call_id not in self.routes:
            binding = self.registrar.lookup(msg.to_ua)
            if binding is None:
                self._reply(msg, 404, src)
                return
            if msg.to_ua in self.redirect_users:
                self._reply(msg, 302, src, contact=binding.node)
                return
            self.routes[msg.call_id] = (src, binding.node)
        route = self.routes.get(msg.call_id)
        if route is None:
            if msg.is_request and msg.kind != "ACK":
                self._reply(msg, 481, src)
            return
        caller, callee = route
        if msg.kind == "INVITE":
            self._reply(msg, 100, caller)
        self._forward(msg, callee if src == caller else caller)


class _Call:
    """Per-call UA bookkeeping (either side)."""

    def __init__(self, dialog: SipDialog, role: str, peer_node: int | None):
        self.dialog = dialog
        self.role = role
        self.peer_node = peer_node  # next SIP hop (proxy or direct contact)
        self.invite_txn: _Transaction | None = None
        self.bye_txn: _Transaction | None = None
        self.cancel_txn: _Transaction | None = None
        self.answer_txn: _Transaction | None = None
        self.ring_timer = None
        self.answered = False
        self.confirmed = False
        self.cancelled = False
        self.ended = False
        self.sender: RtpSender | None = None
        self.receiver: RtpReceiver | None = None
        self.spurts: list[tuple[int, int]] = []
        self.media_dst: int | None = None
        self.rtp_port: int | None = None


class UserAgent(SipEndpoint):
    def __init__(self, engine, node, proxy_node: int, ring_delay: int = RING_DELAY,
                 jitter_factory=None):
        super().__init__(engine, node)
        self.user = user_of(node.id)
        self.proxy_node = proxy_node
        self.ring_delay = ring_delay
        self.calls: dict[str, _Call] = {}
        self.registered_at: int | None = None
        self.registration_failures = 0
        self.signaling_failures = 0
        self.retransmissions = 0
        self.dialog_failures = 0
        self._register_txn: _Transaction | None = None
        self._jitter_factory = jitter_factory
        # Spurt schedule for calls this UA answers, keyed by call_id.
        self.answer_spurts: dict[str, list[tuple[int, int]]] = {}
        self.answer_delays: dict[str, int] = {}

    # -- REGISTER --------------------------------------------------------

    def register(self) -> None:
        if self._register_txn is not None:
            self._register_txn.stop()
        msg = SipMessage("REGISTER", f"reg-{self.user}", self.user, self.user)

        def exhausted():
            self.registration_failures += 1
        self._register_txn = _Transaction(self, msg, self.proxy_node, exhausted)

    @property
    def registered(self) -> bool:
        return self.registered_at is not None

    # -- caller actions --------------------------------------------------

    def invite(self, callee_node: int, call_id: str, spurts=()) -> SipDialog:
        if call_id in self.calls:
            raise IllegalTransition(f"call {call_id} already exists on {self.user}")
        dialog = SipDialog(call_id, self.node.id, callee_node)
        call = self.calls[call_id] = _Call(dialog, "caller", self.proxy_node)
        call.spurts = list(spurts)
        call.media_dst = callee_node
        dialog.apply(DialogEvent.INVITE_SENT, self.engine.now)
        self._send_invite(call)
        return dialog

    def _send_invite(self, call: _Call) -> None:
        d = call.dialog
        msg = SipMessage("INVITE", d.call_id, self.user, user_of(d.receiver))
        call.invite_txn = _Transaction(self, msg, call.peer_node, lambda: self._fail(call, "no answer"))

    def bye(self, call_id: str) -> SipDialog:
        call = self.calls[call_id]
        d = call.dialog
        d.apply(DialogEvent.BYE_SENT, self.engine.now)
        self._stop_media(call)
        msg = SipMessage("BYE", call_id, self.user, user_of(d.receiver))
        call.bye_txn = _Transaction(self, msg, call.peer_node, lambda: self._fail(call, "BYE unanswered"))
        return d

    def cancel(self, call_id: str) -> SipDialog:
        call = self.calls[call_id]
        d = call.dialog
        d.apply(DialogEvent.CANCEL_SENT, self.engine.now)
        if call.invite_txn:
            call.invite_txn.stop()
        msg = SipMessage("CANCEL", call_id, self.user, user_of(d.receiver))
        call.cancel_txn = _Transaction(self, msg, call.peer_node)
        return d

    def _fail(self, call: _Call, why: str) -> None:
        d = call.dialog
        if (d.state, DialogEvent.FAILED) in TRANSITIONS:
            d.failure = why
            d.apply(DialogEvent.FAILED, self.engine.now)
            self.dialog_failures += 1
            self._stop_media(call)

    # -- media -----------------------------------------------------------

    def _start_media(self, call: _Call) -> None:
        d = call.dialog
        base = f"rtp:{d.call_id}:{self.node.id}"
        call.sender = RtpSender(self.engine, self.node, call.media_dst, base, call.spurts,
                                port=self._media_port(d.call_id))
        call.sender.start()

    def _stop_media(self, call: _Call) -> None:
        if call.sender is not None and call.sender.active:
            call.sender.stop()

    def _media_port(self, call_id: str) -> int:
        return 10000 + zlib.crc32(call_id.encode()) % 50000  # same on both ends

    def _ensure_receiver(self, call: _Call) -> None:
        if call.receiver is None:
            d = call.dialog
            peer = d.receiver if call.role == "caller" else d.initiator
            jb = self._jitter_factory() if self._jitter_factory else None
            call.receiver = RtpReceiver(f"rtp:{d.call_id}:{peer}", **({"jitter": jb} if jb else {}))
            self.node.bind(self._media_port(d.call_id),
                           lambda pkt, r=call.receiver: r.on_packet(pkt, self.engine.now))

    # -- message handling ------------------------------------------------

    def handle(self, msg: SipMessage, src: int) -> None:
        if msg.call_id == f"reg-{self.user}":
            if msg.kind == "RESPONSE" and msg.response_code == 200 and self._register_txn:
                self._register_txn.stop()
                self.registered_at = self.engine.now
            return
        if msg.is_request:
            self._handle_request(msg, src)
        else:
            self._handle_response(msg, src)

    def _respond(self, req: SipMessage, code: int, dst: int) -> None:
        self.transmit(SipMessage("RESPONSE", req.call_id, req.from_ua, req.to_ua, code,
                                 req.kind), dst)

    def _handle_response(self, msg: SipMessage, src: int) -> None:
        call = self.calls.get(msg.call_id)
        if call is None or call.role != "caller":
            return
        d = call.dialog
        now = self.engine.now
        code = msg.response_code
        if msg.cseq_kind == "INVITE":
            if call.invite_txn:
                call.invite_txn.stop()
            if code == 180 and d.state is DialogState.INVITING:
                d.apply(DialogEvent.PROVISIONAL, now)
            elif code == 200:
                self._send_ack(call, msg)
                if d.state in (DialogState.INVITING, DialogState.RINGING):
                    d.apply(DialogEvent.ANSWERED, now)
                    self._ensure_receiver(call)
                    self._start_media(call)
            elif code == 302 and d.state in (DialogState.INVITING, DialogState.RINGING):
                call.peer_node = msg.contact
                self._send_invite(call)
            elif code == 487:
                self._send_ack(call, msg)
            elif code >= 400:
                self._fail(call, f"INVITE rejected with {code}")
        elif msg.cseq_kind == "BYE" and code == 200:
            if call.bye_txn:
                call.bye_txn.stop()
            if d.state is DialogState.TERMINATING:
                d.apply(DialogEvent.BYE_CONFIRMED, now)
        elif msg.cseq_kind == "CANCEL" and code == 200:
            if call.cancel_txn:
                call.cancel_txn.stop()

    def _send_ack(self, call: _Call, resp: SipMessage) -> None:
        self.transmit(SipMessage("ACK", resp.call_id, self.user, resp.to_ua), call.peer_node)

    def _handle_request(self, msg: SipMessage, src: int) -> None:
        now = self.engine.now
        call = self.calls.get(msg.call_id)
        if msg.kind == "INVITE":
            if call is None:
                d = SipDialog(msg.call_id, node_of(msg.from_ua), self.node.id)
                call = self.calls[msg.call_id] = _Call(d, "callee", src)
                call.spurts = self.answer_spurts.get(msg.call_id, [])
                call.media_dst = d.initiator
                self._ensure_receiver(call)
                self._respond(msg, 180, src)
                delay = self.answer_delays.get(msg.call_id, self.ring_delay)
                call.ring_timer = self.engine.after(delay, self._answer, call, msg,
                                                    kind="sip.answer", target=msg.call_id)
            else:
                call.peer_node = src
                self._respond(msg, 200 if call.answered else 180, src)
            return
        if call is None:
            if msg.kind != "ACK":
                self._respond(msg, 481, src)
            return
        if msg.kind == "ACK":
            if call.answer_txn:
                call.answer_txn.stop()
            if call.answered and not call.cancelled and not call.confirmed:
                call.confirmed = True
                self._start_media(call)
        elif msg.kind == "CANCEL":
            self._respond(msg, 200, src)
            if not call.cancelled and not call.confirmed:
                call.cancelled = True
                self.engine.cancel(call.ring_timer)
                if call.answer_txn:
                    call.answer_txn.stop()
                if not call.answered:
                    self._respond(SipMessage("INVITE", msg.call_id, msg.from_ua, msg.to_ua), 487, src)
        elif msg.kind == "BYE":
            self._respond(msg, 200, src)
            if not call.ended:
                call.ended = True
                self._stop_media(call)

    def _answer(self, call: _Call, invite: SipMessage) -> None:
        call.ring_timer = None
        if call.cancelled:
            return
        call.answered = True
        resp = SipMessage("RESPONSE", invite.call_id, invite.from_ua, invite.to_ua, 200, "INVITE")
        call.answer_txn = _Transaction(self, resp, call.peer_node)
