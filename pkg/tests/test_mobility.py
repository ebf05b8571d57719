import pytest
from hypothesis import given, strategies as st

from voipsim.engine import US_PER_S
from voipsim.mobility import (NEVER, Waypoint, WaypointPath, count_reevaluations, distance,
                              next_move_event, position_at)


def _path():
    # 10 m east at 1 m/s, then 30 m north at 10 m/s.
    return WaypointPath((0.0, 0.0), 0, (Waypoint(10, 0, 1), Waypoint(10, 30, 10)))


def test_positions_along_segments():
    p = _path()
    assert position_at(p, 0) == (0.0, 0.0)
    assert position_at(p, 5 * US_PER_S) == pytest.approx((5.0, 0.0))
    assert position_at(p, 11 * US_PER_S) == pytest.approx((10.0, 10.0))
    assert position_at(p, 100 * US_PER_S) == (10, 30)
    assert p.end_time == pytest.approx(13 * US_PER_S)


def test_reevaluation_schedule_is_1s_and_stops():
    p = _path()
    assert next_move_event(p, 0) == US_PER_S
    assert next_move_event(p, int(12.5 * US_PER_S)) == 13 * US_PER_S
    assert next_move_event(p, 13 * US_PER_S) == NEVER
    # 1..10 in the first segment, 11, 12, 13 in the second.
    assert count_reevaluations(p, 60 * US_PER_S) == 13


def test_static_and_delayed_paths():
    assert next_move_event(WaypointPath((1.0, 1.0)), 0) == NEVER
    late = WaypointPath((0.0, 0.0), 5 * US_PER_S, (Waypoint(1, 0, 1),))
    assert next_move_event(late, 0) == 5 * US_PER_S
    assert position_at(late, 3 * US_PER_S) == (0.0, 0.0)


def test_bad_inputs():
    with pytest.raises(ValueError):
        Waypoint(0, 0, 0)
    with pytest.raises(ValueError):
        position_at(_path(), -1)


@given(st.integers(min_value=0, max_value=20 * US_PER_S))
def test_speed_never_exceeds_segment_limit(t):
    p = _path()
    dt = 1000
    moved = distance(position_at(p, t), position_at(p, t + dt))
    assert moved <= p.max_speed * dt / US_PER_S + 1e-9


def test_midpoint_of_single_segment():
    p = WaypointPath((0.0, 0.0), 2 * US_PER_S, (Waypoint(100, 0, 10),))
    assert position_at(p, 7 * US_PER_S) == pytest.approx((50.0, 0.0))


def test_reevaluation_is_min_of_interval_and_boundary():
    p = WaypointPath((0.0, 0.0), 0, (Waypoint(30, 0, 1),))
    assert next_move_event(p, int(10.2 * US_PER_S)) == int(11.2 * US_PER_S)
    assert next_move_event(p, int(29.5 * US_PER_S)) == 30 * US_PER_S


def test_slow_hosts_reevaluate_less_than_host_1():
    from voipsim.config import load_paper_scenario
    cfg = load_paper_scenario()
    counts = {}
    for nid in (1, 7, 8):
        spec = cfg.nodes[nid]
        path = WaypointPath(spec.position, spec.move_start,
                            tuple(Waypoint(*w) for w in spec.waypoints))
        counts[nid] = count_reevaluations(path, cfg.duration)
    assert counts[7] < counts[1] and counts[8] < counts[1]
