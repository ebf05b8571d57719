import pytest

from voipsim.config import load_paper_scenario, parse_scenario
from voipsim.engine import US_PER_S
from voipsim.report import FIGURE_METRICS, render_files
from voipsim.runner import Simulation, run_scenario

from conftest import SMALL


@pytest.fixture(scope="module")
def small():
    return parse_scenario(SMALL)


@pytest.fixture(scope="module")
def small_runs(small):
    return {phy: run_scenario(small, phy) for phy in "AB"}


def test_every_figure_metric_present_once(small_runs):
    for rep in small_runs.values():
        for m in FIGURE_METRICS:
            assert m in rep.series
        names = list(render_files(rep))
        assert len(names) == len(set(names))


def test_call_timeline(small_runs):
    for rep in small_runs.values():
        (row,) = rep.timeline
        assert row.state == "Terminated"
        assert row.initiation == 1 * US_PER_S
        assert 1.5 * US_PER_S <= row.establishment < 2 * US_PER_S
        assert row.end == 6.5 * US_PER_S
        # 3 s of initiator talk and 1 s of receiver talk at 50 frames/s.
        assert (row.initiator_sent, row.receiver_sent) == (150, 50)
        assert row.initiator_received == 50 and row.receiver_received == 150


def test_conservation_and_closure(small_runs):
    for rep in small_runs.values():
        assert rep.conservation and not rep.conservation_violations()
        assert rep.jitter_closure and all(rep.jitter_closure.values())


def test_background_traffic(small_runs):
    for rep in small_runs.values():
        assert rep.scalar("app.ftp_complete", "bulk") == 1.0
        assert rep.scalar("app.ftp_bytes_acked", "bulk") == 300_000
        assert rep.scalar("app.cbr_packets_sent") == 200
        assert rep.scalar("app.cbr_packets_received") == 200
    assert (small_runs["A"].scalar("app.ftp_server_throughput", "peak")
            > small_runs["B"].scalar("app.ftp_server_throughput", "peak"))


def test_same_seed_same_bytes(small, small_runs):
    again = run_scenario(small, "B")
    assert render_files(again) == render_files(small_runs["B"])


def test_seed_changes_backoff_dependent_output(small, small_runs):
    other = run_scenario(small, "B", seed=6)
    assert render_files(other) != render_files(small_runs["B"])


def test_mobility_reevaluations(small):
    sim = Simulation(small, "B")
    sim.run()
    # 5 m at 1 m/s from t = 1 s: re-evaluated at 1, 2, ..., 6 s.
    assert sim.moves == {1: 6}


def test_overrides_reach_the_mac():
    cfg = parse_scenario(SMALL + "\n[phy B]\ncw_min = 7\nslot_time = 9\n")
    sim = Simulation(cfg, "B")
    mac = sim.net.nodes[1].macs[1]
    assert mac.phy.cw_min == 7 and mac.phy.slot_time == 9
    assert Simulation(cfg, "A").phy.cw_min == 15


def test_shipped_scenario_short_horizon():
    cfg = load_paper_scenario()
    sim = Simulation(cfg, "B", duration=3 * US_PER_S)
    rep = sim.run()
    assert sim.moves == {1: 3, 7: 3, 8: 3}
    assert all(ua.registered for ua in sim.uas.values())
    assert not rep.conservation_violations()
    # Every host sits well inside free-space range, so links run at 11 Mb/s.
    med = sim.net.media[1]
    assert set(med.link_rate.values()) == {11_000_000}


def test_self_comparison_ratios_are_one(small_runs):
    from voipsim.report import compare
    cmp = compare(small_runs["B"], small_runs["B"])
    assert all(r.ratio == 1.0 for r in cmp.rows)


def test_shipped_timeline_has_five_rows():
    rep = run_scenario(load_paper_scenario(), "B", duration=2 * US_PER_S)
    assert [r.call_id for r in rep.timeline] == [
        "voip_4_5", "voip_3_7", "voip_1_9", "voip_2_8", "voip_5_7"]
    assert all(r.state == "Idle" for r in rep.timeline)
