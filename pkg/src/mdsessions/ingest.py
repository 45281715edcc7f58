"""Event-log parsing, app-session pairing, validation, and panel filtering.

Two input shapes are supported: raw foreground/background event streams
(JSONL or CSV) that get paired into app sessions here, and pre-paired
session CSVs with explicit start/end columns.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional, TextIO

from .intervals import Interval

DEVICE_TYPES = ("smartphone", "tablet")
PLATFORMS = ("android", "ios", "other")
EVENT_KINDS = ("foreground", "background", "screen_off")

SESSION_CSV_HEADER = [
    "user_id",
    "device_id",
    "device_type",
    "platform",
    "app_id",
    "app_category",
    "start",
    "end",
]


class DataError(Exception):
    """Unrecoverable problem with an input file."""


@dataclass(frozen=True)
class AppEvent:
    user_id: str
    device_id: str
    device_type: str
    platform: str
    app_id: str
    app_category: str
    ts: int
    kind: str


@dataclass(frozen=True)
class AppSession:
    """One foreground interval of one app on one device."""

    user_id: str
    device_id: str
    device_type: str
    platform: str
    app_id: str
    app_category: str
    interval: Interval


@dataclass(frozen=True)
class PanelWindow:
    start_date: str  # ISO date, inclusive
    end_date: str  # ISO date, inclusive
    min_active_span_days: int = 23

    def __post_init__(self) -> None:
        if self.start_date >= self.end_date:
            raise ValueError("panel window start_date must precede end_date")
        if self.min_active_span_days < 0:
            raise ValueError("min_active_span_days must be non-negative")


@dataclass
class Diagnostics:
    """Collected per-row problems; never fatal on their own."""

    records: list[dict] = field(default_factory=list)

    def report(self, **info) -> None:
        self.records.append(info)

    def __len__(self) -> int:
        return len(self.records)

    def write_jsonl(self, stream: TextIO) -> None:
        for rec in self.records:
            stream.write(json.dumps(rec, sort_keys=True) + "\n")


_EVENT_FIELDS = ("user_id", "device_id", "device_type", "platform", "app_id", "app_category", "ts", "kind")


def _validate_event(row: dict, where: str, diagnostics: Diagnostics) -> Optional[AppEvent]:
    missing = [k for k in _EVENT_FIELDS if k not in row or row[k] in (None, "")]
    if missing:
        diagnostics.report(where=where, error="missing fields", fields=missing)
        return None
    if row["device_type"] not in DEVICE_TYPES:
        diagnostics.report(where=where, error="unknown device_type", value=str(row["device_type"]))
        return None
    if row["platform"] not in PLATFORMS:
        diagnostics.report(where=where, error="unknown platform", value=str(row["platform"]))
        return None
    if row["kind"] not in EVENT_KINDS:
        diagnostics.report(where=where, error="unknown event kind", value=str(row["kind"]))
        return None
    try:
        # Sub-second timestamps are truncated to whole seconds.
        ts = int(float(row["ts"]))
    except (TypeError, ValueError):
        diagnostics.report(where=where, error="bad timestamp", value=str(row["ts"]))
        return None
    if ts < 0:
        diagnostics.report(where=where, error="negative timestamp", value=ts)
        return None
    return AppEvent(
        user_id=str(row["user_id"]),
        device_id=str(row["device_id"]),
        device_type=row["device_type"],
        platform=row["platform"],
        app_id=str(row["app_id"]),
        app_category=str(row["app_category"]),
        ts=ts,
        kind=row["kind"],
    )


def parse_events(stream: TextIO, fmt: str, diagnostics: Diagnostics) -> list[AppEvent]:
    """Parse an event stream in ``jsonl`` or ``csv`` format.

    Malformed rows are skipped and reported; a file-level format failure
    raises :class:`DataError` with the position.
    """
    events: list[AppEvent] = []
    if fmt == "jsonl":
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                diagnostics.report(where=f"line {lineno}", error="invalid json", detail=str(exc))
                continue
            if not isinstance(row, dict):
                diagnostics.report(where=f"line {lineno}", error="not an object")
                continue
            ev = _validate_event(row, f"line {lineno}", diagnostics)
            if ev is not None:
                events.append(ev)
    elif fmt == "csv":
        try:
            reader = csv.DictReader(stream)
            if reader.fieldnames is None:
                return []
            for lineno, row in enumerate(reader, start=2):
                ev = _validate_event(row, f"row {lineno}", diagnostics)
                if ev is not None:
                    events.append(ev)
        except csv.Error as exc:
            raise DataError(f"CSV parse failure near line {reader.line_num}: {exc}") from exc
    else:
        raise DataError(f"unknown event format: {fmt!r}")
    return events


def pair_sessions(events: Iterable[AppEvent], diagnostics: Diagnostics) -> list[AppSession]:
    """Pair foreground/background events into app sessions.

    Events are grouped per (user, device) and processed in timestamp order.
    A foreground event opens a session; it closes at the earliest of a
    matching background, the next foreground of any app, or screen off.
    Sessions still open at end of stream are dropped and reported.
    """
    per_device: dict[tuple[str, str], list[AppEvent]] = {}
    for ev in events:
        per_device.setdefault((ev.user_id, ev.device_id), []).append(ev)

    sessions: list[AppSession] = []
    for key in sorted(per_device):
        stream = sorted(per_device[key], key=lambda e: e.ts)
        open_ev: Optional[AppEvent] = None
        for ev in stream:
            if ev.kind == "foreground":
                if open_ev is not None:
                    _close(open_ev, ev.ts, sessions, diagnostics)
                open_ev = ev
            else:  # background or screen_off
                if open_ev is None:
                    diagnostics.report(
                        user_id=ev.user_id, device_id=ev.device_id, ts=ev.ts,
                        error=f"{ev.kind} with no open session",
                    )
                    continue
                if ev.kind == "background" and ev.app_id != open_ev.app_id:
                    diagnostics.report(
                        user_id=ev.user_id, device_id=ev.device_id, ts=ev.ts,
                        error="background for different app", app_id=ev.app_id,
                    )
                    continue
                _close(open_ev, ev.ts, sessions, diagnostics)
                open_ev = None
        if open_ev is not None:
            diagnostics.report(
                user_id=open_ev.user_id, device_id=open_ev.device_id, ts=open_ev.ts,
                error="unclosed session at end of stream", app_id=open_ev.app_id,
            )
    return sessions


def _close(open_ev: AppEvent, end_ts: int, sessions: list[AppSession], diagnostics: Diagnostics) -> None:
    if end_ts <= open_ev.ts:
        diagnostics.report(
            user_id=open_ev.user_id, device_id=open_ev.device_id, ts=open_ev.ts,
            error="zero or negative duration session dropped", app_id=open_ev.app_id,
        )
        return
    sessions.append(
        AppSession(
            user_id=open_ev.user_id,
            device_id=open_ev.device_id,
            device_type=open_ev.device_type,
            platform=open_ev.platform,
            app_id=open_ev.app_id,
            app_category=open_ev.app_category,
            interval=Interval(open_ev.ts, end_ts),
        )
    )


def normalize(sessions: Iterable[AppSession], diagnostics: Diagnostics) -> list[AppSession]:
    """Sort per-device sessions and resolve same-device overlaps.

    The later session is authoritative: the earlier session is truncated to
    the later one's start, and dropped if that leaves zero duration.
    """
    per_device: dict[tuple[str, str], list[AppSession]] = {}
    for s in sessions:
        per_device.setdefault((s.user_id, s.device_id), []).append(s)

    out: list[AppSession] = []
    for key in sorted(per_device):
        # At equal starts the longer session counts as earlier, so it is the
        # one truncated (to zero length, i.e. dropped).
        ordered = sorted(per_device[key], key=lambda s: (s.interval.start, -s.interval.end))
        for i, s in enumerate(ordered):
            end = s.interval.end
            if i + 1 < len(ordered):
                nxt = ordered[i + 1].interval.start
                if nxt < end:
                    end = nxt
                    diagnostics.report(
                        user_id=s.user_id, device_id=s.device_id,
                        start=s.interval.start, error="overlap truncated", new_end=end,
                    )
            if end <= s.interval.start:
                diagnostics.report(
                    user_id=s.user_id, device_id=s.device_id,
                    start=s.interval.start, error="session dropped after truncation",
                )
                continue
            if end != s.interval.end:
                s = AppSession(
                    s.user_id, s.device_id, s.device_type, s.platform,
                    s.app_id, s.app_category, Interval(s.interval.start, end),
                )
            out.append(s)
    return out


def _usage_date(ts: int) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


def filter_active(
    sessions: Iterable[AppSession], window: PanelWindow
) -> tuple[set[str], set[str]]:
    """Split users into (retained, dropped) by the activity-span rule.

    A user is retained iff for every device they own, the span in calendar
    days (UTC) between first and last usage is at least the threshold.
    """
    span: dict[tuple[str, str], tuple[int, int]] = {}
    for s in sessions:
        key = (s.user_id, s.device_id)
        lo, hi = span.get(key, (s.interval.start, s.interval.end))
        span[key] = (min(lo, s.interval.start), max(hi, s.interval.end))

    retained: set[str] = set()
    dropped: set[str] = set()
    users = {u for u, _ in span}
    for user in users:
        ok = True
        for (u, _), (lo, hi) in span.items():
            if u != user:
                continue
            days = (_usage_date(hi).date() - _usage_date(lo).date()).days
            if days < window.min_active_span_days:
                ok = False
                break
        (retained if ok else dropped).add(user)
    return retained, dropped


def write_sessions_csv(sessions: Iterable[AppSession], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SESSION_CSV_HEADER)
    for s in sessions:
        writer.writerow(
            [s.user_id, s.device_id, s.device_type, s.platform, s.app_id,
             s.app_category, s.interval.start, s.interval.end]
        )


def read_sessions_csv(stream: TextIO, diagnostics: Diagnostics) -> list[AppSession]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return []
    missing = [c for c in SESSION_CSV_HEADER if c not in reader.fieldnames]
    if missing:
        raise DataError(f"session CSV missing columns: {missing}")
    sessions: list[AppSession] = []
    for lineno, row in enumerate(reader, start=2):
        if row["device_type"] not in DEVICE_TYPES:
            diagnostics.report(where=f"row {lineno}", error="unknown device_type", value=row["device_type"])
            continue
        if row["platform"] not in PLATFORMS:
            diagnostics.report(where=f"row {lineno}", error="unknown platform", value=row["platform"])
            continue
        try:
            start, end = int(float(row["start"])), int(float(row["end"]))
            interval = Interval(start, end)
        except ValueError as exc:
            diagnostics.report(where=f"row {lineno}", error="bad interval", detail=str(exc))
            continue
        sessions.append(
            AppSession(
                row["user_id"], row["device_id"], row["device_type"], row["platform"],
                row["app_id"], row["app_category"], interval,
            )
        )
    return sessions


def sessions_csv_roundtrip(sessions: list[AppSession]) -> list[AppSession]:
    """Serialize then re-parse; used to check the CSV schema is lossless."""
    buf = io.StringIO()
    write_sessions_csv(sessions, buf)
    buf.seek(0)
    return read_sessions_csv(buf, Diagnostics())
