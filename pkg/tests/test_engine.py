import pytest
from hypothesis import given, strategies as st

from voipsim.engine import (Engine, RngStream, SchedulingError, SimulationFault, draw_uniform,
                            seconds, to_seconds)


def test_seconds_round_trip():
    assert seconds(1.5) == 1_500_000
    assert to_seconds(250_000) == 0.25


def test_same_instant_fires_in_schedule_order():
    eng = Engine()
    log = []
    for tag in "abc":
        eng.schedule(10, log.append, tag)
    eng.schedule(5, log.append, "first")
    eng.run_until(100)
    assert log == ["first", "a", "b", "c"]


def test_cancel_is_lazy_and_skipped():
    eng = Engine()
    log = []
    ev = eng.schedule(10, log.append, "gone")
    eng.schedule(20, log.append, "kept")
    assert len(eng) == 2
    eng.cancel(ev)
    eng.cancel(ev)  # idempotent
    assert len(eng) == 1
    summary = eng.run_until(30)
    assert log == ["kept"]
    assert summary.events_fired == 1
    assert eng.now == 30


def test_cannot_schedule_in_the_past():
    eng = Engine()
    eng.run_until(100)
    with pytest.raises(SchedulingError):
        eng.schedule(99, lambda: None)
    with pytest.raises(SchedulingError):
        eng.run_until(50)


def test_handler_exception_is_wrapped_with_event_context():
    eng = Engine()
    eng.schedule(7, lambda: 1 / 0, kind="boom", target="node3")
    with pytest.raises(SimulationFault) as info:
        eng.run_until(10)
    msg = str(info.value)
    assert "boom" in msg and "node3" in msg and "t=7us" in msg
    assert isinstance(info.value.cause, ZeroDivisionError)


def test_run_until_leaves_later_events_pending():
    eng = Engine()
    log = []
    eng.schedule(10, log.append, 1)
    eng.schedule(11, log.append, 2)
    eng.run_until(10)
    assert log == [1]
    assert eng.peek_time() == 11


def test_rng_streams_are_reproducible_and_independent():
    s1, s2 = RngStream(42, "x"), RngStream(42, "x")
    assert [s1.uniform_int(0, 10**6) for _ in range(20)] == [s2.uniform_int(0, 10**6) for _ in range(20)]
    other = RngStream(42, "y")
    fresh = RngStream(42, "x")
    assert [other.uniform_int(0, 10**6) for _ in range(20)] != [fresh.uniform_int(0, 10**6) for _ in range(20)]


def test_engine_streams_are_cached_per_id():
    eng = Engine(3)
    assert eng.rng("a") is eng.rng("a")
    assert eng.rng("a") is not eng.rng("b")


def test_empty_draw_range_rejected():
    with pytest.raises(ValueError):
        draw_uniform(RngStream(1, "s"), 5, 4)


@given(st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=60))
def test_firing_order_is_time_then_insertion(times):
    eng = Engine()
    fired = []
    for i, t in enumerate(times):
        eng.schedule(t, fired.append, (t, i))
    eng.run_until(1000)
    assert fired == sorted(fired)
    assert len(fired) == len(times)


@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=0, max_value=50))
def test_draws_stay_in_closed_range(seed, cw):
    s = RngStream(seed, "backoff")
    for _ in range(20):
        assert 0 <= s.uniform_int(0, cw) <= cw


def test_degenerate_range_and_uniform_mean():
    s = RngStream(42, "mac.backoff.node1")
    assert draw_uniform(s, 7, 7) == 7
    draws = [draw_uniform(s, 0, 31) for _ in range(100_000)]
    assert abs(sum(draws) / len(draws) - 15.5) < 0.2


def test_empty_queue_runs_to_horizon():
    eng = Engine()
    summary = eng.run_until(134 * 1_000_000)
    assert summary.events_fired == 0 and eng.now == 134_000_000


def test_event_at_time_zero_fires_first():
    eng = Engine()
    log = []
    eng.schedule(3, log.append, "later")
    eng.schedule(0, log.append, "zero")
    eng.run_until(2)
    assert log == ["zero"] and len(eng) == 1
