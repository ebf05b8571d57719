import pytest

from voipsim.apps import (CbrApp, CbrFlow, FtpApp, FtpFlow, throughput_series)
from voipsim.engine import US_PER_MS, US_PER_S, Engine
from voipsim.network import Network

from oracles import wired_ftp_completion_us


def _pair(**link):
    eng = Engine(1)
    net = Network(eng)
    net.add_node(1)
    net.add_node(2)
    net.add_wired_link(1, 2, **link)
    net.build_routes()
    return eng, net


def test_throughput_buckets():
    series = throughput_series([(0, 100), (999_999, 25), (2_500_000, 50)], end=3 * US_PER_S)
    assert series == [(0, 1000.0), (US_PER_S, 0.0), (2 * US_PER_S, 400.0)]
    assert throughput_series([]) == [(0, 0.0)]
    with pytest.raises(ValueError):
        throughput_series([], bucket=0)


def test_cbr_counts_and_delay_over_wire():
    eng, net = _pair(rate_bps=100_000_000, latency_us=10)
    flow = CbrFlow("cbr", 1, 2, start_at=US_PER_S, stop_at=3 * US_PER_S)
    CbrApp(eng, net.nodes[1], net.nodes[2], flow)
    eng.run_until(4 * US_PER_S)
    assert flow.sent == flow.received == 100
    # 540 bytes at 100 Mb/s: 43.2 -> 44 us, plus 10 us latency.
    assert set(flow.delays) == {54}
    assert flow.mean_throughput_bps() == pytest.approx(100 * 512 * 8 / 2)
    assert flow.departures[1] - flow.departures[0] == 20 * US_PER_MS


def test_cbr_needs_start_before_stop():
    with pytest.raises(ValueError):
        CbrFlow("x", 1, 2, start_at=5, stop_at=5)


@pytest.mark.parametrize("n_chunks", [1, 4, 10, 37])
def test_ftp_completion_matches_pipeline_closed_form(n_chunks):
    eng, net = _pair(rate_bps=100_000_000, latency_us=10)
    flow = FtpFlow("ftp", 1, 2, item_bytes=1460 * n_chunks, start_at=1000)
    FtpApp(eng, net.nodes[1], net.nodes[2], flow)
    eng.run_until(US_PER_S)
    assert flow.complete
    assert flow.completed_at - flow.start_at == wired_ftp_completion_us(n_chunks)
    assert flow.bytes_received == flow.bytes_acked == flow.item_bytes
    assert flow.retransmissions == 0


def test_ftp_short_last_chunk():
    flow = FtpFlow("f", 1, 2, item_bytes=3000)
    assert flow.n_chunks == 3 and flow.chunk_size(2) == 80
    with pytest.raises(ValueError):
        FtpFlow("f", 1, 2, item_bytes=0)


def test_ftp_recovers_from_timeouts():
    # An RTO below the round trip forces spurious retransmissions; the client
    # must still count every byte exactly once.
    eng, net = _pair(rate_bps=1_000_000, latency_us=10)
    flow = FtpFlow("ftp", 1, 2, item_bytes=20_000, rto=5 * US_PER_MS)
    FtpApp(eng, net.nodes[1], net.nodes[2], flow)
    eng.run_until(10 * US_PER_S)
    assert flow.complete and flow.retransmissions > 0
    assert flow.bytes_received == 20_000
    assert sum(b for _, b in flow.client_log) == 20_000
    assert sum(b for _, b in flow.server_log) > 20_000


def test_two_ftp_flows_share_endpoints():
    eng, net = _pair()
    flows = [FtpFlow(f"f{i}", 1, 2, item_bytes=5000) for i in range(2)]
    for f in flows:
        FtpApp(eng, net.nodes[1], net.nodes[2], f)
    eng.run_until(US_PER_S)
    assert all(f.complete and f.bytes_received == 5000 for f in flows)


def test_cbr_ten_seconds_is_500_packets():
    eng, net = _pair()
    flow = CbrFlow("cbr", 1, 2, start_at=0, stop_at=10 * US_PER_S)
    CbrApp(eng, net.nodes[1], net.nodes[2], flow)
    eng.run_until(11 * US_PER_S)
    assert flow.sent == flow.received == 500
    assert flow.mean_throughput_bps() == 8 * 512 / 0.02


def test_one_megabyte_at_window_limited_rate():
    eng, net = _pair(rate_bps=100_000_000, latency_us=10)
    flow = FtpFlow("ftp", 1, 2, item_bytes=1_000_000)
    FtpApp(eng, net.nodes[1], net.nodes[2], flow)
    eng.run_until(US_PER_S)
    # 684 full chunks and a 1360-byte tail whose 1388-byte frame takes 112 us.
    assert flow.n_chunks == 685
    assert flow.completed_at == wired_ftp_completion_us(685, last_chunk_us=112)
    series = throughput_series(flow.client_log, US_PER_S, 0, US_PER_S)
    assert series[0][1] == 8_000_000


def test_forced_single_loss_costs_one_retransmission():
    eng, net = _pair(rate_bps=100_000_000, latency_us=10)
    flow = FtpFlow("ftp", 1, 2, item_bytes=1460 * 20)
    app = FtpApp(eng, net.nodes[1], net.nodes[2], flow)
    real_send = app.server.send
    dropped = []

    def lossy(pkt):
        if pkt.data[1] == 5 and not dropped:
            dropped.append(pkt)
            return
        real_send(pkt)
    app.server.send = lossy
    eng.run_until(US_PER_S)
    assert flow.complete and flow.retransmissions == 1
    assert flow.bytes_acked == flow.bytes_received == flow.item_bytes


def test_one_kilobyte_bucket():
    assert throughput_series([(500_000, 1000)], end=US_PER_S) == [(0, 8000.0)]
