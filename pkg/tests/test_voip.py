import pytest
from hypothesis import given, strategies as st

from voipsim.engine import US_PER_MS, US_PER_S
from voipsim.voip import (JitterBuffer, JitterOutcome, Verdict, classify_quality, e2e_delay_stats,
                          frame_times, jitter_insert, talk_time)

MS = US_PER_MS


def test_frames_every_20ms_inside_spurts():
    times = list(frame_times([(0, 60 * MS), (100 * MS, 141 * MS)], media_start=1000))
    assert times == [1000, 21000, 41000, 101000, 121000, 141000]
    assert list(frame_times([(0, US_PER_S)], 0, media_end=50 * MS)) == [0, 20 * MS, 40 * MS]
    assert talk_time([(0, 3 * US_PER_S), (5 * US_PER_S, 6 * US_PER_S)]) == 4 * US_PER_S


def test_one_second_of_talk_is_fifty_frames():
    assert len(list(frame_times([(0, US_PER_S)], 0))) == 50


def test_jitter_outcomes():
    jb = JitterBuffer(60 * MS, 120 * MS)
    assert jb.insert(0, 0, 10 * MS) is JitterOutcome.SCHEDULED_PLAY
    assert jb.insert(0, 0, 11 * MS) is JitterOutcome.DUPLICATE
    assert jb.insert(1, 20 * MS, 80 * MS) is JitterOutcome.SCHEDULED_PLAY  # exactly on time
    assert jitter_insert(jb, 2, 40 * MS, 100 * MS + 1) is JitterOutcome.DROPPED_LATE
    jb.flush()
    assert jb.played == 2 and jb.drops == 1 and jb.closure_holds()
    assert jb.play_log == [(60 * MS, 0), (80 * MS, 1)]


def test_overflow_when_span_exceeds_capacity():
    jb = JitterBuffer(playout_delay=500 * MS, capacity=40 * MS)
    for k in range(3):
        assert jb.insert(k, k * 20 * MS, k * 20 * MS) is JitterOutcome.SCHEDULED_PLAY
    assert jb.insert(3, 60 * MS, 60 * MS) is JitterOutcome.DROPPED_OVERFLOW
    assert jb.closure_holds()


@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 200)), max_size=120))
def test_jitter_closure_always_holds(arrivals):
    jb = JitterBuffer()
    now = 0
    for seq, extra_ms in arrivals:
        gen = seq * 20 * MS
        now = max(now, gen + extra_ms * MS)
        jb.insert(seq, gen, now)
        assert jb.closure_holds()
    jb.flush()
    assert jb.closure_holds() and not jb.buffered


def test_quality_threshold():
    assert classify_quality(0.0).verdict is Verdict.GOOD
    assert classify_quality(0.0499).verdict is Verdict.GOOD
    assert classify_quality(0.05).verdict is Verdict.POOR
    with pytest.raises(ValueError):
        classify_quality(1.5)


def test_delay_stats():
    s = e2e_delay_stats([1000, 3000])
    assert (s.mean_ms, s.max_ms, s.count) == (2.0, 3.0, 2)
    assert e2e_delay_stats([]) is None


def test_late_boundary_is_strict():
    jb = JitterBuffer(60 * MS)
    assert jb.insert(0, 0, 0) is JitterOutcome.SCHEDULED_PLAY
    assert jb.insert(1, 0, 61 * MS) is JitterOutcome.DROPPED_LATE


def test_table_thresholds_either_side():
    assert classify_quality(0.04).verdict is Verdict.GOOD
    assert classify_quality(0.06).verdict is Verdict.POOR


def test_delay_stat_examples():
    one = e2e_delay_stats([9 * MS])
    assert one.mean_ms == one.max_ms == 9
    three = e2e_delay_stats([10 * MS, 20 * MS, 30 * MS])
    assert (three.mean_ms, three.max_ms) == (20, 30)


def test_talk_rate_is_64kbps():
    frames = list(frame_times([(0, 3 * US_PER_S)], 0))
    assert len(frames) * 160 * 8 / 3 == 64_000
