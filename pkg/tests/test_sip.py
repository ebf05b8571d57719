import pytest

from voipsim.engine import Engine
from voipsim.network import Network
from voipsim.sip import (LEGAL_EDGES, TRANSITIONS, DialogEvent, DialogState, IllegalTransition,
                         Registrar, SipDialog, SipMessage, SipProxy, UserAgent, node_of, user_of)

from sipfuzz import fuzz

S, E = DialogState, DialogEvent


def test_happy_path_transitions_record_times():
    d = SipDialog("c", 1, 2)
    d.apply(E.INVITE_SENT, 10)
    d.apply(E.PROVISIONAL, 20)
    d.apply(E.ANSWERED, 30)
    d.apply(E.BYE_SENT, 40)
    d.apply(E.BYE_CONFIRMED, 50)
    assert d.state is S.TERMINATED
    assert (d.invite_sent_at, d.established_at, d.bye_at, d.ended_at) == (10, 30, 40, 50)
    assert [h[3] for h in d.history] == [S.INVITING, S.RINGING, S.ESTABLISHED, S.TERMINATING,
                                          S.TERMINATED]


@pytest.mark.parametrize("state", [S.IDLE, S.INVITING, S.RINGING])
def test_bye_before_established_rejected(state):
    d = SipDialog("c", 1, 2, state=state)
    with pytest.raises(IllegalTransition):
        d.apply(E.BYE_SENT, 0)
    assert d.state is state


def test_cancel_after_established_rejected():
    d = SipDialog("c", 1, 2, state=S.ESTABLISHED)
    with pytest.raises(IllegalTransition):
        d.apply(E.CANCEL_SENT, 0)


def test_terminal_states_have_no_exits():
    assert not [k for k in TRANSITIONS if k[0] in (S.TERMINATED, S.CANCELLED)]
    assert all(src not in (S.TERMINATED, S.CANCELLED) for src, _ in LEGAL_EDGES)


def test_message_validation():
    with pytest.raises(ValueError):
        SipMessage("RESPONSE", "c", "a", "b")
    with pytest.raises(ValueError):
        SipMessage("INVITE", "c", "a", "b", response_code=200)
    with pytest.raises(ValueError):
        SipMessage("PUBLISH", "c", "a", "b")
    assert SipMessage("INVITE", "c", "a", "b").body_bytes == 500
    assert node_of(user_of(7)) == 7


def _wired(redirect=()):
    eng = Engine(1)
    net = Network(eng)
    for n in (1, 2, 10):
        net.add_node(n)
    net.add_wired_link(1, 10)
    net.add_wired_link(2, 10)
    net.build_routes()
    proxy = SipProxy(eng, net.nodes[10], Registrar(), redirect_users=[user_of(n) for n in redirect])
    a = UserAgent(eng, net.nodes[1], 10, ring_delay=1_000_000)
    b = UserAgent(eng, net.nodes[2], 10, ring_delay=1_000_000)
    return eng, proxy, a, b


def test_call_through_proxy():
    eng, proxy, a, b = _wired()
    a.register()
    b.register()
    eng.run_until(100_000)
    assert a.registered and b.registered
    assert proxy.registrar.lookup("user2").node == 2
    d = a.invite(2, "call", spurts=[(0, 1_000_000)])
    b.answer_spurts["call"] = [(0, 500_000)]
    eng.run_until(500_000)
    assert d.state is S.RINGING
    eng.run_until(2_000_000)
    assert d.state is S.ESTABLISHED
    assert b.calls["call"].confirmed
    eng.run_until(3_000_000)
    a.bye("call")
    eng.run_until(4_000_000)
    assert d.state is S.TERMINATED
    assert b.calls["call"].ended
    # 1 s of talk from the caller and 0.5 s from the callee, 20 ms frames.
    assert a.calls["call"].sender.sent == 50
    assert b.calls["call"].sender.sent == 25
    assert b.calls["call"].receiver.received == 50
    assert a.retransmissions == 0


def test_unknown_callee_gets_404():
    eng, proxy, a, b = _wired()
    a.register()
    eng.run_until(100_000)
    d = a.invite(2, "call")
    eng.run_until(200_000)
    assert d.state is S.TERMINATED and "404" in d.failure


def test_redirect_then_direct_invite():
    eng, proxy, a, b = _wired(redirect=[2])
    a.register()
    b.register()
    eng.run_until(100_000)
    d = a.invite(2, "call")
    eng.run_until(3_000_000)
    assert d.state is S.ESTABLISHED
    assert a.calls["call"].peer_node == 2
    assert not proxy.routes


def test_cancel_while_ringing():
    eng, proxy, a, b = _wired()
    a.register()
    b.register()
    eng.run_until(100_000)
    d = a.invite(2, "call")
    eng.run_until(300_000)
    a.cancel("call")
    eng.run_until(3_000_000)
    assert d.state is S.CANCELLED
    assert b.calls["call"].cancelled and not b.calls["call"].answered


def test_stray_request_gets_481():
    eng, proxy, a, b = _wired()
    b.register()
    eng.run_until(100_000)
    proxy.handle(SipMessage("BYE", "nope", "user1", "user2"), 1)
    eng.run_until(200_000)
    assert a.messages_received == 1


def test_invite_retransmits_until_exhausted():
    eng, proxy, a, b = _wired()
    a.max_attempts = 3
    a.retransmit_interval = 1000
    # No proxy on the path: messages to an unrouted node are discarded.
    a.proxy_node = 99
    d = a.invite(2, "call")
    eng.run_until(10_000)
    assert a.retransmissions == 2 and a.signaling_failures == 1
    assert d.state is S.TERMINATED and d.failure == "no answer"


def test_fuzz_small_batch():
    illegal, misuse = fuzz(3000, seed=7)
    assert illegal == 0 and misuse == 0


def test_reregister_replaces_binding():
    reg = Registrar()
    reg.bind("user4", 4, 0)
    reg.bind("user4", 7, 10)
    assert reg.lookup("user4").node == 7 and len(reg.bindings) == 1


def test_zero_ring_delay_timeline():
    eng, proxy, a, b = _wired()
    a.register()
    b.register()
    eng.run_until(100_000)
    b.ring_delay = 0
    t0 = eng.now
    d = a.invite(2, "call")
    eng.run_until(t0 + 10_000)
    # 528-byte requests: 43 + 10 us per hop; 328-byte responses: 27 + 10 us.
    # INVITE reaches the callee at +106. Its 180 and 200 leave back to back
    # (133, 160) and reach the proxy at 143 and 170. The proxy relays the 180
    # over 143-170 and the 200 over 170-197, arriving at +207.
    assert d.established_at - t0 == 207


def test_bye_right_after_establishment_sends_almost_nothing():
    eng, proxy, a, b = _wired()
    a.register()
    b.register()
    eng.run_until(100_000)
    d = a.invite(2, "call", spurts=[(0, 5_000_000)])
    while d.state is not S.ESTABLISHED:
        eng.run_until(eng.now + 1)
    a.bye("call")
    eng.run_until(eng.now + 1_000_000)
    assert a.calls["call"].sender.sent <= 1
    assert d.state is S.TERMINATED


def test_cancel_while_ringing_sends_no_media():
    eng, proxy, a, b = _wired()
    a.register()
    b.register()
    eng.run_until(100_000)
    d = a.invite(2, "call", spurts=[(0, 1_000_000)])
    eng.run_until(400_000)
    assert d.state is S.RINGING
    a.cancel("call")
    eng.run_until(3_000_000)
    assert d.state is S.CANCELLED
    assert a.calls["call"].sender is None and b.calls["call"].sender is None


def test_cancel_racing_200_loses_to_earlier_event():
    from sipfuzz import SinkNode
    eng = Engine()
    ua = UserAgent(eng, SinkNode(1), proxy_node=10)
    d = ua.invite(2, "c")
    ok = SipMessage("RESPONSE", "c", ua.user, "user2", 200, "INVITE")
    outcome = []
    eng.schedule(100, ua.handle, ok, 10)

    def try_cancel():
        try:
            ua.cancel("c")
            outcome.append("cancelled")
        except IllegalTransition:
            outcome.append("rejected")
    eng.schedule(100, try_cancel)
    eng.run_until(200)
    assert d.state is S.ESTABLISHED and outcome == ["rejected"]


def test_cancel_on_idle_dialog_is_an_error():
    with pytest.raises(IllegalTransition):
        SipDialog("c", 1, 2).apply(E.CANCEL_SENT, 0)
