"""Scenario file format.

A scenario is plain text made of ``[section]`` headers followed by
``key = value`` lines. ``#`` starts a comment. Section kinds:

``[simulation]``   duration (s), seed, phy (A or B)
``[radio]``        tx_power_dbm, antenna_gain_db
``[phy A]``/``[phy B]``  overrides of PHY timing (slot_time, sifs, cw_min, ...) and
                   rx_sensitivity = Mb/s:dBm pairs, which also fixes the rate set
``[channel N]``    frequency_ghz, medium (wireless or wired)
``[node N]``       position = x, y; mask; height; optional waypoints and move_start
``[link A-B]``     wired point-to-point link: rate_mbps, latency_us, capacity
``[queue]``        capacity (packets per interface)
``[mac]``          retry_limit
``[jitter]``       playout_ms, capacity_ms
``[sip]``          proxy, register_at, bye_at, retransmit_ms, max_attempts, redirect
``[flow NAME]``    kind = voip | ftp | cbr plus kind-specific keys

Times are written in seconds and held internally as integer microseconds.
Waypoints are ``x, y @ speed`` entries separated by ``;``. Talk spurts are
``start-stop`` pairs in seconds after media start, separated by commas.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .engine import US_PER_S
from .radio import PROFILES, parse_mask

_SECTION = re.compile(r"^\[\s*([a-z]+)(?:\s+([^\]]+?))?\s*\]$")
_KV = re.compile(r"^([a-z_][a-z0-9_]*)\s*=\s*(.*)$")

PHY_OVERRIDABLE = ("slot_time", "sifs", "preamble_plus_plcp", "cw_min", "cw_max", "control_rate")


class ScenarioError(ValueError):
    """All validation problems found in a scenario, not just the first."""

    def __init__(self, errors: list[str], source: str = "<scenario>"):
        self.errors = list(errors)
        self.source = source
        super().__init__(f"{source}: {len(errors)} error(s)\n" + "\n".join(f"  {e}" for e in errors))


def _us(seconds_text: str) -> int:
    return round(float(seconds_text) * US_PER_S)


def _fmt_s(us: int) -> str:
    return repr(us / US_PER_S)


@dataclass
class NodeSpec:
    id: int
    position: tuple[float, float]
    mask: str
    height: float = 1.5
    waypoints: tuple[tuple[float, float, float], ...] = ()
    move_start: int = 0
    line: int = field(default=0, compare=False, repr=False)

    @property
    def channels(self) -> frozenset[int]:
        return parse_mask(self.mask)


@dataclass
class ChannelSpec:
    index: int
    frequency_hz: float
    medium: str = "wireless"
    line: int = field(default=0, compare=False, repr=False)


@dataclass
class LinkSpec:
    a: int
    b: int
    rate_bps: int = 100_000_000
    latency_us: int = 10
    capacity: int | None = None
    line: int = field(default=0, compare=False, repr=False)


@dataclass
class FlowSpec:
    name: str
    kind: str
    src: int
    dst: int
    params: dict = field(default_factory=dict)
    line: int = field(default=0, compare=False, repr=False)


@dataclass
class SipSpec:
    proxy: int = 10
    register_at: int = 1 * US_PER_S
    bye_at: int | None = None
    retransmit_ms: int = 500
    max_attempts: int = 7
    redirect: tuple[int, ...] = ()


@dataclass
class ScenarioConfig:
    duration: int = 134 * US_PER_S
    seed: int = 42
    phy: str = "A"
    tx_power_dbm: float = 39.0
    antenna_gain_db: float = 15.0
    phy_overrides: dict = field(default_factory=dict)  # {"A": {...}, "B": {...}}
    channels: dict = field(default_factory=dict)
    nodes: dict = field(default_factory=dict)
    links: list = field(default_factory=list)
    flows: dict = field(default_factory=dict)
    queue_capacity: int = 50
    retry_limit: int = 7
    playout_ms: int = 60
    jitter_capacity_ms: int = 120
    sip: SipSpec = field(default_factory=SipSpec)

    def flows_of(self, kind: str) -> list[FlowSpec]:
        return [f for f in self.flows.values() if f.kind == kind]

    def wireless_channels(self) -> list[int]:
        return sorted(c for c, spec in self.channels.items() if spec.medium == "wireless")


# -- value parsers ---------------------------------------------------------

def _pair(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x, y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _waypoints(text: str) -> tuple[tuple[float, float, float], ...]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        if "@" not in item:
            raise ValueError(f"waypoint {item!r} lacks '@ speed'")
        xy, speed = item.split("@", 1)
        x, y = _pair(xy)
        out.append((x, y, float(speed)))
    return tuple(out)


def parse_spurts(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        a, sep, b = item.partition("-")
        if not sep:
            raise ValueError(f"spurt {item!r} is not 'start-stop'")
        s, e = _us(a), _us(b)
        if not 0 <= s < e:
            raise ValueError(f"spurt {item!r} must satisfy 0 <= start < stop")
        out.append((s, e))
    return tuple(out)


def format_spurts(spurts) -> str:
    return ", ".join(f"{_fmt_s(s)}-{_fmt_s(e)}" for s, e in spurts)


# Per-kind flow keys: name -> (parser, formatter, default)
_FLOW_KEYS = {
    "voip": {
        "invite_at": (_us, _fmt_s, None),
        "ring_delay": (_us, _fmt_s, 2 * US_PER_S),
        "initiator_spurts": (parse_spurts, format_spurts, ()),
        "receiver_spurts": (parse_spurts, format_spurts, ()),
    },
    "ftp": {
        "start": (_us, _fmt_s, 0),
        "item_bytes": (int, str, 25_000_000),
        "window": (int, str, 4),
        "chunk_bytes": (int, str, 1460),
        "rto_ms": (int, str, 200),
    },
    "cbr": {
        "start": (_us, _fmt_s, 50 * US_PER_S),
        "stop": (_us, _fmt_s, 130 * US_PER_S),
        "payload_bytes": (int, str, 512),
        "interval_ms": (int, str, 20),
    },
}


# -- loading ---------------------------------------------------------------

def _split_sections(text: str, errors: list[str]):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = (m.group(1), (m.group(2) or "").strip(), lineno, [])
            sections.append(current)
            continue
        kv = _KV.match(line)
        if kv is None:
            errors.append(f"line {lineno}: cannot parse {raw.strip()!r}")
            continue
        if current is None:
            errors.append(f"line {lineno}: key {kv.group(1)!r} outside any section")
            continue
        current[3].append((kv.group(1), kv.group(2).strip(), lineno))
    return sections


class _Reader:
    """Pulls typed values from one section, recording errors instead of raising."""

    def __init__(self, kind, label, lineno, items, errors):
        self.where = f"[{kind}{' ' + label if label else ''}] (line {lineno})"
        self.errors = errors
        self.values: dict[str, tuple[str, int]] = {}
        for key, value, ln in items:
            if key in self.values:
                errors.append(f"line {ln}: duplicate key {key!r} in {self.where}")
            self.values[key] = (value, ln)
        self.used: set[str] = set()

    def get(self, key, conv, default=None, required=False):
        if key not in self.values:
            if required:
                self.errors.append(f"{self.where}: missing required key {key!r}")
            return default
        self.used.add(key)
        text, ln = self.values[key]
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            self.errors.append(f"line {ln}: bad value for {key!r} in {self.where}: {exc}")
            return default

    def finish(self, allowed=None):
        allowed = self.used if allowed is None else set(allowed)
        for key, (_, ln) in self.values.items():
            if key not in allowed:
                self.errors.append(f"line {ln}: unknown key {key!r} in {self.where}")


def parse_sensitivity(text: str) -> dict[int, float]:
    """``"6:-82, 9:-81"`` -> {6_000_000: -82.0, 9_000_000: -81.0}."""
    table = {}
    for item in text.split(","):
        rate, _, dbm = item.partition(":")
        if not dbm:
            raise ValueError(f"expected rate:dBm, got {item.strip()!r}")
        table[round(float(rate) * 1e6)] = float(dbm)
    rates = sorted(table)
    if any(table[a] >= table[b] for a, b in zip(rates, rates[1:])):
        raise ValueError("sensitivity must rise strictly with rate")
    return table


def format_sensitivity(table: dict[int, float]) -> str:
    return ", ".join(f"{_num(r / 1e6)}:{_num(d)}" for r, d in sorted(table.items()))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioConfig:
    errors: list[str] = []
    cfg = ScenarioConfig()
    for kind, label, lineno, items in _split_sections(text, errors):
        r = _Reader(kind, label, lineno, items, errors)
        if kind == "simulation":
            cfg.duration = r.get("duration", _us, cfg.duration)
            cfg.seed = r.get("seed", int, cfg.seed)
            cfg.phy = r.get("phy", lambda s: s.strip().upper(), cfg.phy)
            if cfg.phy not in PROFILES:
                errors.append(f"{r.where}: phy must be A or B, got {cfg.phy!r}")
        elif kind == "radio":
            cfg.tx_power_dbm = r.get("tx_power_dbm", float, cfg.tx_power_dbm)
            cfg.antenna_gain_db = r.get("antenna_gain_db", float, cfg.antenna_gain_db)
        elif kind == "phy":
            std = label.upper()
            if std not in PROFILES:
                errors.append(f"{r.where}: unknown PHY {label!r}")
            over = {k: r.get(k, int) for k in PHY_OVERRIDABLE if k in r.values}
            table = r.get("rx_sensitivity", parse_sensitivity)
            if table:
                over["rx_sensitivity"] = table
                over["rates"] = tuple(sorted(table))
            cfg.phy_overrides[std] = {k: v for k, v in over.items() if v is not None}
        elif kind == "channel":
            try:
                idx = int(label)
            except ValueError:
                errors.append(f"{r.where}: channel index must be an integer")
                r.finish(())
                continue
            if idx in cfg.channels:
                errors.append(f"{r.where}: channel {idx} declared twice")
            freq = r.get("frequency_ghz", float, None, required=True)
            medium = r.get("medium", str, "wireless")
            if medium not in ("wireless", "wired"):
                errors.append(f"{r.where}: medium must be wireless or wired")
            cfg.channels[idx] = ChannelSpec(idx, (freq or 0.0) * 1e9, medium, lineno)
        elif kind == "node":
            try:
                nid = int(label)
            except ValueError:
                errors.append(f"{r.where}: node id must be an integer")
                r.finish(())
                continue
            if nid in cfg.nodes:
                errors.append(f"{r.where}: node {nid} declared twice")
            pos = r.get("position", _pair, (0.0, 0.0), required=True)
            mask = r.get("mask", str, "", required=True)
            if mask and not re.fullmatch(r"[01]+", mask):
                errors.append(f"{r.where}: mask {mask!r} must be a string of 0/1")
                mask = ""
            cfg.nodes[nid] = NodeSpec(nid, pos, mask,
                                      height=r.get("height", float, 1.5),
                                      waypoints=r.get("waypoints", _waypoints, ()),
                                      move_start=r.get("move_start", _us, 0), line=lineno)
        elif kind == "link":
            m = re.fullmatch(r"(\d+)\s*-\s*(\d+)", label)
            if m is None:
                errors.append(f"{r.where}: link label must be 'A-B'")
                r.finish(())
                continue
            rate = r.get("rate_mbps", float, 100.0)
            cfg.links.append(LinkSpec(int(m.group(1)), int(m.group(2)),
                                      rate_bps=round(rate * 1e6),
                                      latency_us=r.get("latency_us", int, 10),
                                      capacity=r.get("capacity", int, None), line=lineno))
        elif kind == "queue":
            cfg.queue_capacity = r.get("capacity", int, cfg.queue_capacity)
        elif kind == "mac":
            cfg.retry_limit = r.get("retry_limit", int, cfg.retry_limit)
        elif kind == "jitter":
            cfg.playout_ms = r.get("playout_ms", int, cfg.playout_ms)
            cfg.jitter_capacity_ms = r.get("capacity_ms", int, cfg.jitter_capacity_ms)
        elif kind == "sip":
            s = cfg.sip
            s.proxy = r.get("proxy", int, s.proxy)
            s.register_at = r.get("register_at", _us, s.register_at)
            s.bye_at = r.get("bye_at", _us, s.bye_at)
            s.retransmit_ms = r.get("retransmit_ms", int, s.retransmit_ms)
            s.max_attempts = r.get("max_attempts", int, s.max_attempts)
            s.redirect = r.get("redirect", _int_list, s.redirect)
        elif kind == "flow":
            if not label:
                errors.append(f"{r.where}: flow needs a name")
                r.finish(())
                continue
            if label in cfg.flows:
                errors.append(f"{r.where}: flow id {label!r} overlaps an earlier flow")
            fkind = r.get("kind", str, "", required=True)
            src = r.get("src", int, None, required=True)
            dst = r.get("dst", int, None, required=True)
            keys = _FLOW_KEYS.get(fkind)
            if keys is None:
                if fkind:
                    errors.append(f"{r.where}: flow kind must be voip, ftp or cbr, got {fkind!r}")
                r.finish(())
                continue
            params = {k: r.get(k, conv, default) for k, (conv, _, default) in keys.items()}
            cfg.flows.setdefault(label, FlowSpec(label, fkind, src, dst, params, lineno))
        else:
            errors.append(f"line {lineno}: unknown section [{kind}]")
            r.finish(())
            continue
        r.finish()
    errors.extend(validate(cfg))
    if errors:
        raise ScenarioError(errors, source)
    return cfg


def validate(cfg: ScenarioConfig) -> list[str]:
    errors = []
    if not cfg.nodes:
        errors.append("no nodes declared")
    if cfg.duration <= 0:
        errors.append("simulation duration must be positive")
    for node in cfg.nodes.values():
        for ch in sorted(parse_mask(node.mask)) if node.mask else ():
            if ch not in cfg.channels:
                errors.append(f"node {node.id} (line {node.line}): mask {node.mask} selects undeclared channel {ch}")
        if any(s <= 0 for *_, s in node.waypoints):
            errors.append(f"node {node.id} (line {node.line}): waypoint speeds must be positive")
    for link in cfg.links:
        for end in (link.a, link.b):
            if end not in cfg.nodes:
                errors.append(f"link {link.a}-{link.b} (line {link.line}): unknown node {end}")
        if link.a == link.b:
            errors.append(f"link {link.a}-{link.b} (line {link.line}): endpoints must differ")
    for f in cfg.flows.values():
        for role, nid in (("src", f.src), ("dst", f.dst)):
            if nid is not None and nid not in cfg.nodes:
                errors.append(f"flow {f.name} (line {f.line}): {role} references unknown node {nid}")
        if f.src is not None and f.src == f.dst:
            errors.append(f"flow {f.name} (line {f.line}): src and dst are the same node")
        p = f.params
        if f.kind == "voip" and p.get("invite_at") is None:
            errors.append(f"flow {f.name} (line {f.line}): voip flow needs invite_at")
        if f.kind == "cbr" and not p["start"] < p["stop"]:
            errors.append(f"flow {f.name} (line {f.line}): cbr start must precede stop")
        if f.kind == "ftp" and p["item_bytes"] <= 0:
            errors.append(f"flow {f.name} (line {f.line}): ftp item_bytes must be positive")
    if cfg.flows_of("voip") and cfg.sip.proxy not in cfg.nodes:
        errors.append(f"sip proxy node {cfg.sip.proxy} is not declared")
    return errors


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


# -- emitting --------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def dump_scenario(cfg: ScenarioConfig) -> str:
    out = ["[simulation]", f"duration = {_fmt_s(cfg.duration)}", f"seed = {cfg.seed}",
           f"phy = {cfg.phy}", "", "[radio]", f"tx_power_dbm = {_num(cfg.tx_power_dbm)}",
           f"antenna_gain_db = {_num(cfg.antenna_gain_db)}", ""]
    for std in sorted(cfg.phy_overrides):
        out.append(f"[phy {std}]")
        for k, v in cfg.phy_overrides[std].items():
            if k == "rx_sensitivity":
                out.append(f"{k} = {format_sensitivity(v)}")
            elif k != "rates":
                out.append(f"{k} = {v}")
        out.append("")
    for idx in sorted(cfg.channels):
        ch = cfg.channels[idx]
        out += [f"[channel {idx}]", f"frequency_ghz = {_num(ch.frequency_hz / 1e9)}",
                f"medium = {ch.medium}", ""]
    for nid in sorted(cfg.nodes):
        n = cfg.nodes[nid]
        out += [f"[node {nid}]", f"position = {_num(n.position[0])}, {_num(n.position[1])}",
                f"mask = {n.mask}", f"height = {_num(n.height)}"]
        if n.waypoints:
            wp = "; ".join(f"{_num(x)}, {_num(y)} @ {_num(s)}" for x, y, s in n.waypoints)
            out += [f"waypoints = {wp}", f"move_start = {_fmt_s(n.move_start)}"]
        out.append("")
    for link in cfg.links:
        out += [f"[link {link.a}-{link.b}]", f"rate_mbps = {_num(link.rate_bps / 1e6)}",
                f"latency_us = {link.latency_us}"]
        if link.capacity is not None:
            out.append(f"capacity = {link.capacity}")
        out.append("")
    out += ["[queue]", f"capacity = {cfg.queue_capacity}", "", "[mac]",
            f"retry_limit = {cfg.retry_limit}", "", "[jitter]", f"playout_ms = {cfg.playout_ms}",
            f"capacity_ms = {cfg.jitter_capacity_ms}", ""]
    s = cfg.sip
    out += ["[sip]", f"proxy = {s.proxy}", f"register_at = {_fmt_s(s.register_at)}"]
    if s.bye_at is not None:
        out.append(f"bye_at = {_fmt_s(s.bye_at)}")
    out += [f"retransmit_ms = {s.retransmit_ms}", f"max_attempts = {s.max_attempts}"]
    if s.redirect:
        out.append("redirect = " + ", ".join(map(str, s.redirect)))
    out.append("")
    for f in cfg.flows.values():
        out += [f"[flow {f.name}]", f"kind = {f.kind}", f"src = {f.src}", f"dst = {f.dst}"]
        for key, (_, fmt, _) in _FLOW_KEYS[f.kind].items():
            v = f.params.get(key)
            if v is not None:
                out.append(f"{key} = {fmt(v)}")
        out.append("")
    return "\n".join(out)


def config_fields() -> list[str]:
    return [f.name for f in fields(ScenarioConfig)]


def paper_scenario_path() -> Path:
    return Path(__file__).parent / "data" / "paper_scenario.ini"


def load_paper_scenario() -> ScenarioConfig:
    return load_scenario(paper_scenario_path())

