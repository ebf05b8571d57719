"""Build a simulation from a scenario config, run it, and collect a RunReport."""

from __future__ import annotations

import logging

from .apps import CbrApp, CbrFlow, FtpApp, FtpFlow, throughput_series
from .config import ScenarioConfig
from .engine import US_PER_MS, US_PER_S, Engine
from .mobility import NEVER, Waypoint, WaypointPath, next_move_event, position_at, distance
from .network import Network
from .radio import RadioConfig, path_loss_db, profile, received_power_dbm
from .report import RunReport, Series, TimelineRow
from .sip import DialogState, Registrar, SipProxy, UserAgent, user_of
from .voip import FRAME_INTERVAL, JitterBuffer, classify_quality, e2e_delay_stats

log = logging.getLogger(__name__)

SAMPLE_INTERVAL = US_PER_S


class Simulation:
    def __init__(self, cfg: ScenarioConfig, phy: str | None = None, seed: int | None = None,
                 duration: int | None = None):
        self.cfg = cfg
        self.phy_name = (phy or cfg.phy).upper()
        self.seed = cfg.seed if seed is None else seed
        self.duration = cfg.duration if duration is None else duration
        base = profile(self.phy_name)
        self.phy = base.with_overrides(**cfg.phy_overrides.get(self.phy_name, {}))
        self.engine = Engine(self.seed)
        self.net = Network(self.engine)
        self.radio = RadioConfig(cfg.tx_power_dbm, cfg.antenna_gain_db)
        self.paths: dict[int, WaypointPath] = {}
        self.uas: dict[int, UserAgent] = {}
        self.proxy: SipProxy | None = None
        self.cbr: list[CbrApp] = []
        self.ftp: list[FtpApp] = []
        self.samples: dict[str, list[tuple[int, float]]] = {}
        self.moves: dict[int, int] = {}  # mobility re-evaluations per node
        self._build()

    # -- construction ------------------------------------------------------

    def _build(self) -> None:
        cfg = self.cfg
        for ch in cfg.wireless_channels():
            self.net.add_medium(ch, self.phy)
        for nid in sorted(cfg.nodes):
            spec = cfg.nodes[nid]
            self.net.add_node(nid)
            wps = tuple(Waypoint(x, y, s) for x, y, s in spec.waypoints)
            self.paths[nid] = WaypointPath(spec.position, spec.move_start, wps)
        for nid in sorted(cfg.nodes):
            for ch in sorted(cfg.nodes[nid].channels):
                if ch in self.net.media:
                    self.net.attach_wireless(nid, ch, cfg.queue_capacity, cfg.retry_limit)
        for link in cfg.links:
            self.net.add_wired_link(link.a, link.b, rate_bps=link.rate_bps,
                                    latency_us=link.latency_us,
                                    capacity=link.capacity or cfg.queue_capacity)
        self.net.build_routes()
        for nid in sorted(self.paths):
            self._update_links(nid)
            path = self.paths[nid]
            if not path.is_static:
                self._schedule_move(nid, 0)
        self._build_sip()
        self._build_apps()
        self.engine.schedule(0, self._sample, kind="metrics.sample", target="report")

    def _update_links(self, nid: int) -> None:
        """Refresh received power between ``nid`` and every peer it shares a channel with."""
        now = self.engine.now
        me = self.cfg.nodes[nid]
        pos = position_at(self.paths[nid], now)
        for ch, medium in sorted(self.net.media.items()):
            if ch not in me.channels:
                continue
            freq = self.cfg.channels[ch].frequency_hz
            for other in sorted(medium.ifaces):
                if other == nid:
                    continue
                d = max(distance(pos, position_at(self.paths[other], now)), 0.01)
                loss = path_loss_db(d, freq, me.height, self.cfg.nodes[other].height)
                p = received_power_dbm(self.radio, loss)
                medium.set_rx_power(nid, other, p)
                medium.set_rx_power(other, nid, p)

    def _schedule_move(self, nid: int, t: int) -> None:
        nxt = next_move_event(self.paths[nid], t)
        if nxt != NEVER and nxt <= self.duration:
            self.engine.schedule(nxt, self._on_move, nid, kind="mobility.reevaluate", target=nid)

    def _on_move(self, nid: int) -> None:
        self.moves[nid] = self.moves.get(nid, 0) + 1
        self._update_links(nid)
        self._schedule_move(nid, self.engine.now)

    def _jitter(self) -> JitterBuffer:
        return JitterBuffer(self.cfg.playout_ms * US_PER_MS, self.cfg.jitter_capacity_ms * US_PER_MS)

    def _build_sip(self) -> None:
        cfg = self.cfg
        voip = cfg.flows_of("voip")
        if not voip:
            return
        s = cfg.sip
        self.proxy = SipProxy(self.engine, self.net.nodes[s.proxy], Registrar(),
                              redirect_users=[user_of(n) for n in s.redirect])
        self._tune(self.proxy)
        users = sorted({f.src for f in voip} | {f.dst for f in voip})
        for nid in users:
            ua = self.uas[nid] = UserAgent(self.engine, self.net.nodes[nid], s.proxy,
                                           jitter_factory=self._jitter)
            self._tune(ua)
            self.engine.schedule(s.register_at, ua.register, kind="sip.register", target=nid)
        for f in voip:
            p = f.params
            callee = self.uas[f.dst]
            callee.answer_spurts[f.name] = list(p["receiver_spurts"])
            callee.answer_delays[f.name] = p["ring_delay"]
            caller = self.uas[f.src]
            self.engine.schedule(p["invite_at"], caller.invite, f.dst, f.name,
                                 list(p["initiator_spurts"]), kind="sip.invite", target=f.name)
            if s.bye_at is not None and s.bye_at <= self.duration:
                self.engine.schedule(s.bye_at, self._bye, caller, f.name, kind="sip.bye",
                                     target=f.name)

    def _tune(self, endpoint) -> None:
        endpoint.retransmit_interval = self.cfg.sip.retransmit_ms * US_PER_MS
        endpoint.max_attempts = self.cfg.sip.max_attempts

    @staticmethod
    def _bye(ua: UserAgent, call_id: str) -> None:
        call = ua.calls.get(call_id)
        if call is None:
            return
        if call.dialog.state is DialogState.ESTABLISHED:
            ua.bye(call_id)
        elif call.dialog.state in (DialogState.INVITING, DialogState.RINGING):
            ua.cancel(call_id)

    def _build_apps(self) -> None:
        nodes = self.net.nodes
        for f in self.cfg.flows.values():
            p = f.params
            if f.kind == "cbr":
                flow = CbrFlow(f.name, f.src, f.dst, p["payload_bytes"],
                               p["interval_ms"] * US_PER_MS, p["start"], p["stop"])
                self.cbr.append(CbrApp(self.engine, nodes[f.src], nodes[f.dst], flow))
            elif f.kind == "ftp":
                flow = FtpFlow(f.name, f.src, f.dst, p["item_bytes"], p["window"],
                               p["chunk_bytes"], p["rto_ms"] * US_PER_MS, p["start"])
                self.ftp.append(FtpApp(self.engine, nodes[f.src], nodes[f.dst], flow))

    # -- sampling ----------------------------------------------------------

    def _receivers(self):
        for nid in sorted(self.uas):
            ua = self.uas[nid]
            for cid in sorted(ua.calls):
                r = ua.calls[cid].receiver
                if r is not None:
                    yield r

    def _record(self, name: str, value: float) -> None:
        self.samples.setdefault(name, []).append((self.engine.now, value))

    def _sample(self) -> None:
        macs = list(self.net.all_macs())
        self._record("mac.retx_ack_timeout", sum(m.retx_ack_timeout for m in macs))
        self._record("mac.frames_sent", sum(m.frames_sent for m in macs))
        self._record("mac.frames_received", sum(m.frames_received for m in macs))
        self._record("voip.jitter_drops", sum(r.jitter.drops for r in self._receivers()))
        queues = list(self.net.all_queues())
        deq = sum(q.dequeues for q in queues)
        wait = sum(q.sum_wait for q in queues)
        self._record("stack.fifo_avg_wait", wait / deq / US_PER_MS if deq else 0.0)
        self._record("stack.fifo_drops", sum(q.drops_full for q in queues))
        nxt = self.engine.now + SAMPLE_INTERVAL
        if nxt <= self.duration:
            self.engine.schedule(nxt, self._sample, kind="metrics.sample", target="report")

    # -- run ---------------------------------------------------------------

    def run(self) -> RunReport:
        log.info("running phy=%s seed=%d duration=%.1fs", self.phy_name, self.seed,
                 self.duration / US_PER_S)
        summary = self.engine.run_until(self.duration)
        return self._report(summary.events_fired)

    def _report(self, events_fired: int) -> RunReport:
        rep = RunReport(phy=self.phy_name, seed=self.seed, duration=self.duration,
                        events_fired=events_fired)
        end = self.duration
        for name, unit in (("mac.retx_ack_timeout", "count"), ("mac.frames_sent", "count"),
                           ("mac.frames_received", "count"), ("voip.jitter_drops", "count"),
                           ("stack.fifo_avg_wait", "ms"), ("stack.fifo_drops", "count")):
            pts = self.samples.get(name, [])
            rep.add_series(Series(name, unit, pts))
            rep.add_scalar(name, "all", pts[-1][1] if pts else 0.0, unit)

        server = [rec for app in self.ftp for rec in app.flow.server_log]
        client = [rec for app in self.ftp for rec in app.flow.client_log]
        srv = throughput_series(server, US_PER_S, 0, end)
        cli = throughput_series(client, US_PER_S, 0, end)
        rep.add_series(Series("app.ftp_server_throughput", "bit/s", srv))
        rep.add_series(Series("app.ftp_client_throughput", "bit/s", cli))
        rep.add_scalar("app.ftp_server_throughput", "peak", max((v for _, v in srv), default=0.0), "bit/s")
        rep.add_scalar("app.ftp_client_throughput", "peak", max((v for _, v in cli), default=0.0), "bit/s")
        for app in self.ftp:
            f = app.flow
            rep.add_scalar("app.ftp_bytes_acked", f.flow_id, f.bytes_acked, "byte")
            rep.add_scalar("app.ftp_complete", f.flow_id, 1.0 if f.complete else 0.0, "bool")

        arrivals = [rec for app in self.cbr for rec in app.flow.arrivals]
        delays = [(t, d) for app in self.cbr
                  for (t, _), d in zip(app.flow.arrivals, app.flow.delays)]
        rep.add_series(Series("app.cbr_throughput", "bit/s",
                              throughput_series(arrivals, US_PER_S, 0, end)))
        rep.add_series(Series("app.cbr_delay_ms", "ms", _bucket_mean(delays, end, US_PER_MS)))
        all_delays = [d for _, d in delays]
        st = e2e_delay_stats(all_delays)
        rep.add_scalar("app.cbr_delay_ms", "mean", st.mean_ms if st else 0.0, "ms")
        span = sum(app.flow.stop_at - app.flow.start_at for app in self.cbr)
        rep.add_scalar("app.cbr_throughput", "mean",
                       8 * sum(b for _, b in arrivals) * US_PER_S / span if span else 0.0, "bit/s")
        rep.add_scalar("app.cbr_packets_sent", "all", sum(a.flow.sent for a in self.cbr), "count")
        rep.add_scalar("app.cbr_packets_received", "all", sum(a.flow.received for a in self.cbr), "count")

        self._voip_report(rep)
        self._conservation(rep)
        return rep

    def _voip_report(self, rep: RunReport) -> None:
        voip_delays = []
        total_sent = total_recv = 0
        for f in self.cfg.flows_of("voip"):
            caller, callee = self.uas[f.src], self.uas[f.dst]
            c_call = caller.calls.get(f.name)
            r_call = callee.calls.get(f.name)
            d = c_call.dialog if c_call else None
            sides = []
            for tx_call, rx_call in ((c_call, r_call), (r_call, c_call)):
                sent = tx_call.sender.sent if tx_call and tx_call.sender else 0
                recv = rx_call.receiver.received if rx_call and rx_call.receiver else 0
                sides.append((sent, recv))
                if rx_call and rx_call.receiver:
                    r = rx_call.receiver
                    r.jitter.flush()
                    voip_delays.extend(zip(r.arrival_times, r.delays))
                    loss = 1.0 - min(r.jitter.played, sent) / sent if sent else 0.0
                    q = classify_quality(loss)
                    direction = f"{f.name}:{'fwd' if tx_call is c_call else 'rev'}"
                    rep.add_scalar("voip.loss_fraction", direction, loss, "fraction")
                    rep.add_scalar("voip.quality_verdict", direction, q.verdict.value, "verdict")
                    rep.add_scalar("voip.jitter_drops", direction, r.jitter.drops, "count")
                    rep.jitter_closure[direction] = r.jitter.closure_holds()
            (i_sent, r_recv), (r_sent, i_recv) = sides
            total_sent += i_sent + r_sent
            total_recv += i_recv + r_recv
            rep.timeline.append(TimelineRow(
                call_id=f.name, initiator=f.src, receiver=f.dst,
                initiation=d.invite_sent_at if d else None,
                establishment=d.established_at if d else None,
                end=d.bye_at if d else None,
                initiator_talk=i_sent * FRAME_INTERVAL, receiver_talk=r_sent * FRAME_INTERVAL,
                initiator_sent=i_sent, initiator_received=i_recv,
                receiver_sent=r_sent, receiver_received=r_recv,
                state=d.state.value if d else "Idle"))
        voip_delays.sort()
        st = e2e_delay_stats(dl for _, dl in voip_delays)
        rep.add_series(Series("voip.e2e_delay_ms", "ms",
                              _bucket_mean(voip_delays, self.duration, US_PER_MS)))
        rep.add_scalar("voip.e2e_delay_ms", "mean", st.mean_ms if st else 0.0, "ms")
        rep.add_scalar("voip.packets_sent", "all", total_sent, "count")
        rep.add_scalar("voip.packets_received", "all", total_recv, "count")

    def _conservation(self, rep: RunReport) -> None:
        in_flight = self.net.in_flight_by_flow()
        for fid in sorted(self.net.stats.flows):
            c = self.net.stats.flows[fid]
            rep.conservation[fid] = (c.sent, c.delivered, c.dropped_queue, c.dropped_mac,
                                     c.dropped_routing, in_flight.get(fid, 0))


def _bucket_mean(records, end: int, scale: int, bucket: int = US_PER_S):
    """Per-bucket mean of (t, value) records, scaled; empty buckets report 0."""
    n = -(-end // bucket)
    sums = [0] * n
    counts = [0] * n
    for t, v in records:
        if 0 <= t < end:
            i = t // bucket
            sums[i] += v
            counts[i] += 1
    return [(i * bucket, sums[i] / counts[i] / scale if counts[i] else 0.0) for i in range(n)]


def run_scenario(cfg: ScenarioConfig, phy: str | None = None, seed: int | None = None,
                 duration: int | None = None) -> RunReport:
    return Simulation(cfg, phy, seed, duration).run()
