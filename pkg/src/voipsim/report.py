"""Run reports, two-arm comparison, and CSV/text emission.

Output files written by :func:`emit_outputs`:

``series/<metric>.csv``      t_seconds,value,unit (one file per metric series)
``scalars.csv``              metric,scope,value,unit
``timeline.csv``             one row per VoIP dialog (see ``TIMELINE_COLUMNS``)
``conservation.csv``         per-flow packet accounting at the horizon
``comparison.txt``           only for two-arm runs
"""

from __future__ import annotations

import csv
import io
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .engine import US_PER_S

# Metrics every report must carry (one per figure family).
FIGURE_METRICS = (
    "app.ftp_server_throughput",
    "app.ftp_client_throughput",
    "app.cbr_delay_ms",
    "voip.jitter_drops",
    "mac.retx_ack_timeout",
    "stack.fifo_avg_wait",
)

TIMELINE_COLUMNS = ("call_id", "initiator", "receiver", "initiation_s", "establishment_s",
                    "end_s", "initiator_talk_s", "receiver_talk_s", "initiator_sent",
                    "initiator_received", "receiver_sent", "receiver_received", "state")


@dataclass
class Series:
    name: str
    unit: str
    points: list[tuple[int, float]]

    def peak(self) -> float:
        return max((v for _, v in self.points), default=0.0)


@dataclass
class TimelineRow:
    call_id: str
    initiator: int
    receiver: int
    initiation: int | None
    establishment: int | None
    end: int | None
    initiator_talk: int
    receiver_talk: int
    initiator_sent: int
    initiator_received: int
    receiver_sent: int
    receiver_received: int
    state: str


@dataclass
class RunReport:
    phy: str
    seed: int
    duration: int
    events_fired: int = 0
    series: dict[str, Series] = field(default_factory=dict)
    scalars: dict[tuple[str, str], tuple[object, str]] = field(default_factory=dict)
    timeline: list[TimelineRow] = field(default_factory=list)
    conservation: dict[str, tuple[int, int, int, int, int, int]] = field(default_factory=dict)
    jitter_closure: dict[str, bool] = field(default_factory=dict)

    def add_series(self, s: Series) -> None:
        if s.name in self.series:
            raise ValueError(f"series {s.name} recorded twice")
        self.series[s.name] = s

    def add_scalar(self, metric: str, scope: str, value, unit: str) -> None:
        self.scalars[(metric, scope)] = (value, unit)

    def scalar(self, metric: str, scope: str = "all"):
        return self.scalars[(metric, scope)][0]

    def scalars_of(self, metric: str) -> dict[str, object]:
        return {scope: v for (m, scope), (v, _) in self.scalars.items() if m == metric}

    def conservation_violations(self) -> list[str]:
        bad = []
        for fid, (sent, delivered, dq, dm, dr, inflight) in self.conservation.items():
            if sent != delivered + dq + dm + dr + inflight:
                bad.append(f"{fid}: sent={sent} delivered={delivered} drops={dq}/{dm}/{dr} "
                           f"in_flight={inflight}")
        return bad

    def headline(self) -> dict[str, float]:
        """The comparison quantities, one number each."""
        return {
            "ftp_server_peak": self.scalar("app.ftp_server_throughput", "peak"),
            "ftp_client_peak": self.scalar("app.ftp_client_throughput", "peak"),
            "cbr_delay_ms": self.scalar("app.cbr_delay_ms", "mean"),
            "cbr_throughput": self.scalar("app.cbr_throughput", "mean"),
            "jitter_drops": self.scalar("voip.jitter_drops"),
            "retx_ack_timeout": self.scalar("mac.retx_ack_timeout"),
            "fifo_avg_wait_ms": self.scalar("stack.fifo_avg_wait"),
            "voip_e2e_delay_ms": self.scalar("voip.e2e_delay_ms", "mean"),
            "mac_frames_sent": self.scalar("mac.frames_sent"),
            "mac_frames_received": self.scalar("mac.frames_received"),
        }


# Expected direction per headline metric: which PHY should be larger.
# "=" means equal within EQUAL_TOLERANCE.
EXPECTED = {
    "ftp_server_peak": ("A", ">", "B"),
    "ftp_client_peak": ("A", ">", "B"),
    "cbr_delay_ms": ("B", ">", "A"),
    "cbr_throughput": ("A", "=", "B"),
    "jitter_drops": ("B", ">", "A"),
    "retx_ack_timeout": ("B", ">", "A"),
    "fifo_avg_wait_ms": ("B", ">", "A"),
}
EQUAL_TOLERANCE = 0.01


@dataclass
class ComparisonRow:
    metric: str
    left: float
    right: float
    ratio: float | None  # left / right
    expectation: str | None
    holds: bool | None


@dataclass
class Comparison:
    left: RunReport
    right: RunReport
    rows: list[ComparisonRow]

    @property
    def labels(self) -> tuple[str, str]:
        return self.left.phy, self.right.phy

    @property
    def expectations(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.expectation is not None]

    @property
    def all_hold(self) -> bool:
        exp = self.expectations
        return bool(exp) and all(r.holds for r in exp)

    def exit_code(self) -> int:
        return 0 if self.all_hold else 1

    def row(self, metric: str) -> ComparisonRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)


def _ratio(a: float, b: float) -> float | None:
    if b == 0:
        return None if a != 0 else 1.0
    return a / b


def compare(left: RunReport, right: RunReport) -> Comparison:
    """Per-metric ratios (left / right) and the expected PHY orderings.

    Orderings are only evaluated when the two arms use different PHYs.
    """
    lh, rh = left.headline(), right.headline()
    by_phy = {left.phy: lh, right.phy: rh} if left.phy != right.phy else {}
    rows = []
    for metric in lh:
        exp = EXPECTED.get(metric)
        expectation = holds = None
        if exp is not None and set(by_phy) == {exp[0], exp[2]}:
            hi, rel, lo = exp
            a, b = by_phy[hi][metric], by_phy[lo][metric]
            expectation = f"{hi} {rel} {lo}"
            if rel == ">":
                holds = a > b
            else:
                holds = math.isclose(a, b, rel_tol=EQUAL_TOLERANCE, abs_tol=1e-9)
        rows.append(ComparisonRow(metric, lh[metric], rh[metric], _ratio(lh[metric], rh[metric]),
                                  expectation, holds))
    return Comparison(left, right, rows)


# -- emission --------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 9))
    return str(v)


def _secs(t: int | None) -> str:
    return "" if t is None else repr(t / US_PER_S)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_files(report: RunReport) -> dict[str, str]:
    files = {}
    for name in sorted(report.series):
        s = report.series[name]
        files[f"series/{name}.csv"] = _csv_text(
            ("t_seconds", "value", "unit"), ((_secs(t), _fmt(v), s.unit) for t, v in s.points))
    files["scalars.csv"] = _csv_text(
        ("metric", "scope", "value", "unit"),
        ((m, scope, _fmt(v), unit) for (m, scope), (v, unit) in sorted(report.scalars.items())))
    files["timeline.csv"] = _csv_text(TIMELINE_COLUMNS, (
        (r.call_id, r.initiator, r.receiver, _secs(r.initiation), _secs(r.establishment),
         _secs(r.end), _secs(r.initiator_talk), _secs(r.receiver_talk), r.initiator_sent,
         r.initiator_received, r.receiver_sent, r.receiver_received, r.state)
        for r in report.timeline))
    files["conservation.csv"] = _csv_text(
        ("flow_id", "sent", "delivered", "dropped_queue", "dropped_mac", "dropped_routing",
         "in_flight"),
        ((fid, *vals) for fid, vals in sorted(report.conservation.items())))
    return files


def format_comparison(cmp: Comparison) -> str:
    l, r = cmp.labels
    lines = [f"phy {l} vs phy {r}  (seed {cmp.left.seed}, {cmp.left.duration / US_PER_S:g} s)", ""]
    lines.append(f"{'metric':<22}{l:>16}{r:>16}{'ratio':>10}  expected     result")
    for row in cmp.rows:
        ratio = "n/a" if row.ratio is None else f"{row.ratio:.3f}"
        exp = row.expectation or ""
        res = "" if row.holds is None else ("ok" if row.holds else "VIOLATED")
        lines.append(f"{row.metric:<22}{row.left:>16.4f}{row.right:>16.4f}{ratio:>10}  {exp:<12} {res}")
    lines.append("")
    lines.append("all expected orderings hold" if cmp.all_hold else "expected orderings NOT all held")
    return "\n".join(lines) + "\n"


def emit_outputs(out_dir, reports: list[RunReport], comparison: Comparison | None = None) -> list[Path]:
    """Write every file into a temp dir next to ``out_dir`` then move it into place,
    so a failure never leaves a partial output set."""
    out_dir = Path(out_dir)
    parent = out_dir.parent if str(out_dir.parent) else Path(".")
    if not parent.exists():
        raise OSError(f"parent directory {parent} does not exist")
    files: dict[str, str] = {}
    multi = len(reports) > 1
    for rep in reports:
        prefix = f"phy_{rep.phy.lower()}/" if multi else ""
        if multi and f"{prefix}scalars.csv" in files:
            prefix = f"phy_{rep.phy.lower()}_{len(files)}/"
        for name, text in render_files(rep).items():
            files[prefix + name] = text
    if comparison is not None:
        files["comparison.txt"] = format_comparison(comparison)
    tmp = Path(tempfile.mkdtemp(prefix=".voipsim-", dir=parent))
    try:
        for name, text in files.items():
            p = tmp / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return sorted(out_dir / n for n in files)
