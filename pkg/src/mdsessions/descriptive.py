"""Dataset-level and per-user session statistics, usage shares, hourly
distributions, empirical CDFs, and the timeout-window sweep.

Interaction time is always the sum of app-session durations, including
inside multidevice sessions where devices overlap in time; session length
is the hull duration.
"""

from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .construction import (
    MIXED,
    MultideviceSession,
    UsageSession,
    build_multidevice_sessions,
    build_usage_sessions,
)
from .ingest import AppSession

SESSION_CLASSES = (
    "smartphone_all",
    "tablet_all",
    "smartphone_pure",
    "tablet_pure",
    "multidevice",
)

DEFAULT_TW_GRID = (1, 10, 60, 300, 1000, 10000)


@dataclass
class StatsSummary:
    n: int
    length_mean: float
    length_median: float
    length_std: float
    app_sessions_mean: float
    app_sessions_median: float
    app_sessions_std: float
    interaction_seconds: float

    @classmethod
    def empty(cls) -> "StatsSummary":
        return cls(0, float("nan"), float("nan"), float("nan"),
                   float("nan"), float("nan"), float("nan"), 0.0)


@dataclass
class PerUserSummary:
    """Across-user mean/median/std of per-user statistics (Table-5 style)."""

    n_users: int
    length_median_mean: float
    length_median_median: float
    length_median_std: float
    app_sessions_median_mean: float
    app_sessions_median_median: float
    app_sessions_median_std: float
    sessions_per_day_mean: float
    sessions_per_day_median: float
    sessions_per_day_std: float
    interaction_min_per_day_mean: float
    interaction_min_per_day_median: float
    interaction_min_per_day_std: float


@dataclass
class SweepPoint:
    tw: int
    mean_sessions_per_user: dict[str, float]
    mean_app_sessions_per_usage_session: float


def select_class(
    usage_sessions: Sequence[UsageSession],
    md_sessions: Sequence[MultideviceSession],
    session_class: str,
) -> list:
    if session_class == "multidevice":
        return list(md_sessions)
    device, _, scope = session_class.partition("_")
    out = [s for s in usage_sessions if s.device_type == device]
    if scope == "pure":
        out = [s for s in out if s.purity != MIXED]
    elif scope != "all":
        raise ValueError(f"unknown session class: {session_class!r}")
    return out


def _session_measures(session) -> tuple[int, int, int]:
    """(hull length s, app session count, interaction seconds)."""
    if isinstance(session, MultideviceSession):
        return session.interval.duration, session.app_session_count, session.interaction_seconds
    return session.interval.duration, len(session.app_sessions), session.interaction_seconds


def summarize(sessions: Sequence) -> StatsSummary:
    if not sessions:
        return StatsSummary.empty()
    lengths = [_session_measures(s)[0] for s in sessions]
    counts = [_session_measures(s)[1] for s in sessions]
    interaction = sum(_session_measures(s)[2] for s in sessions)
    return StatsSummary(
        n=len(sessions),
        length_mean=statistics.fmean(lengths),
        length_median=statistics.median(lengths),
        length_std=statistics.pstdev(lengths) if len(lengths) > 1 else 0.0,
        app_sessions_mean=statistics.fmean(counts),
        app_sessions_median=statistics.median(counts),
        app_sessions_std=statistics.pstdev(counts) if len(counts) > 1 else 0.0,
        interaction_seconds=float(interaction),
    )


def usage_shares(
    usage_sessions: Sequence[UsageSession],
    md_sessions: Sequence[MultideviceSession],
) -> dict[str, dict[str, dict[str, float]]]:
    """Usage shares under three denominators for the two partitions.

    Partition "by_device" is {smartphone_all, tablet_all}; partition
    "by_purity" is {smartphone_pure, tablet_pure, multidevice}.  Multidevice
    interaction time sums both devices' app sessions.
    """
    classes = {c: select_class(usage_sessions, md_sessions, c) for c in SESSION_CLASSES}

    def measures(cls: str) -> dict[str, float]:
        sessions = classes[cls]
        return {
            "app_sessions": float(sum(_session_measures(s)[1] for s in sessions)),
            "usage_sessions": float(
                sum(len(s.members) for s in sessions)
                if cls == "multidevice"
                else len(sessions)
            ),
            "interaction_time": float(sum(_session_measures(s)[2] for s in sessions)),
        }

    partitions = {
        "by_device": ("smartphone_all", "tablet_all"),
        "by_purity": ("smartphone_pure", "tablet_pure", "multidevice"),
    }
    result: dict[str, dict[str, dict[str, float]]] = {}
    for name, members in partitions.items():
        totals: dict[str, float] = {}
        raw = {cls: measures(cls) for cls in members}
        for m in raw.values():
            for k, v in m.items():
                totals[k] = totals.get(k, 0.0) + v
        result[name] = {
            cls: {
                k: (100.0 * v / totals[k] if totals[k] else 0.0)
                for k, v in raw[cls].items()
            }
            for cls in members
        }
    return result


def hourly_distribution(
    sessions: Sequence,
    utc_offsets: Optional[dict[str, int]] = None,
) -> list[float]:
    """24-bin share vector of interaction time by local hour of day.

    Each app session's seconds are apportioned to hour bins by overlap.
    Local time uses the per-user UTC offset when provided, else UTC with a
    warning.
    """
    if utc_offsets is None:
        warnings.warn("no UTC offsets provided; hourly bins use UTC", stacklevel=2)
        utc_offsets = {}
    seconds = [0.0] * 24
    for session in sessions:
        apps = (
            session.app_sessions()
            if isinstance(session, MultideviceSession)
            else session.app_sessions
        )
        offset = utc_offsets.get(session.user_id, 0)
        for app in apps:
            t = app.interval.start + offset
            end = app.interval.end + offset
            while t < end:
                hour_end = (t // 3600 + 1) * 3600
                chunk = min(end, hour_end) - t
                seconds[(t // 3600) % 24] += chunk
                t += chunk
    total = sum(seconds)
    if total == 0:
        return [0.0] * 24
    return [100.0 * s / total for s in seconds]


def empirical_cdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous ECDF as sorted (value, cumulative share) pairs."""
    if not values:
        raise ValueError("empirical_cdf needs at least one value")
    ordered = sorted(values)
    n = len(ordered)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(ordered, start=1):
        if out and out[-1][0] == v:
            out[-1] = (v, i / n)
        else:
            out.append((v, i / n))
    return out


def shifted_cdf(values: Sequence[float], shift: float) -> list[tuple[float, float]]:
    """ECDF with values shifted for plotting; raw data is never mutated."""
    return [(v + shift, p) for v, p in empirical_cdf(values)]


@dataclass
class _UserStats:
    lengths: list[int] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    interaction: float = 0.0
    n_sessions: int = 0


def active_span_days(app_sessions: Iterable[AppSession]) -> dict[str, float]:
    span: dict[str, tuple[int, int]] = {}
    for s in app_sessions:
        lo, hi = span.get(s.user_id, (s.interval.start, s.interval.end))
        span[s.user_id] = (min(lo, s.interval.start), max(hi, s.interval.end))
    # At least one day so per-day rates are defined for short panels.
    return {u: max((hi - lo) / 86400.0, 1.0) for u, (lo, hi) in span.items()}


def per_user_summary(
    sessions: Sequence,
    app_sessions: Sequence[AppSession],
) -> Optional[PerUserSummary]:
    """Table-5 style summary: statistics across users of per-user figures."""
    days = active_span_days(app_sessions)
    per_user: dict[str, _UserStats] = {}
    for s in sessions:
        length, count, interaction = _session_measures(s)
        st = per_user.setdefault(s.user_id, _UserStats())
        st.lengths.append(length)
        st.counts.append(count)
        st.interaction += interaction
        st.n_sessions += 1
    if not per_user:
        return None

    med_len = [statistics.median(st.lengths) for st in per_user.values()]
    med_cnt = [statistics.median(st.counts) for st in per_user.values()]
    per_day = [st.n_sessions / days[u] for u, st in per_user.items()]
    min_day = [st.interaction / 60.0 / days[u] for u, st in per_user.items()]

    def stats3(xs: list[float]) -> tuple[float, float, float]:
        return (
            statistics.fmean(xs),
            statistics.median(xs),
            statistics.pstdev(xs) if len(xs) > 1 else 0.0,
        )

    return PerUserSummary(
        len(per_user), *stats3(med_len), *stats3(med_cnt), *stats3(per_day), *stats3(min_day)
    )


def timeout_sweep(
    app_sessions: Sequence[AppSession],
    tw_grid: Sequence[int] = DEFAULT_TW_GRID,
) -> list[SweepPoint]:
    """Full reconstruction at each timeout value; per-user means averaged."""
    points: list[SweepPoint] = []
    users = sorted({s.user_id for s in app_sessions})
    for tw in tw_grid:
        usage = build_usage_sessions(app_sessions, tw)
        md, usage = build_multidevice_sessions(usage, tw)
        class_means: dict[str, float] = {}
        for cls in SESSION_CLASSES:
            sessions = select_class(usage, md, cls)
            per_user = {u: 0 for u in users}
            for s in sessions:
                per_user[s.user_id] += 1
            class_means[cls] = statistics.fmean(per_user.values()) if users else 0.0
        per_user_ratio = []
        for u in users:
            counts = [len(s.app_sessions) for s in usage if s.user_id == u]
            if counts:
                per_user_ratio.append(statistics.fmean(counts))
        points.append(
            SweepPoint(
                tw=tw,
                mean_sessions_per_user=class_means,
                mean_app_sessions_per_usage_session=(
                    statistics.fmean(per_user_ratio) if per_user_ratio else 0.0
                ),
            )
        )
    return points


def category_share_report(
    app_sessions: Sequence[AppSession],
    top_apps: int = 10,
) -> dict[str, dict[str, dict[str, float]]]:
    """Per-device shares of interaction time by category and by named app.

    Apps outside the ``top_apps`` most used fall into an "Other" bucket.
    """
    result: dict[str, dict[str, dict[str, float]]] = {}
    for dt in ("smartphone", "tablet"):
        subset = [s for s in app_sessions if s.device_type == dt]
        total = sum(s.interval.duration for s in subset)
        if total == 0:
            result[dt] = {"categories": {}, "apps": {}}
            continue
        by_cat: dict[str, float] = {}
        by_app: dict[str, float] = {}
        for s in subset:
            by_cat[s.app_category] = by_cat.get(s.app_category, 0.0) + s.interval.duration
            by_app[s.app_id] = by_app.get(s.app_id, 0.0) + s.interval.duration
        top = dict(sorted(by_app.items(), key=lambda kv: (-kv[1], kv[0]))[:top_apps])
        other = sum(v for k, v in by_app.items() if k not in top)
        apps = {k: 100.0 * v / total for k, v in top.items()}
        if other:
            apps["Other"] = 100.0 * other / total
        result[dt] = {
            "categories": {k: 100.0 * v / total for k, v in sorted(by_cat.items())},
            "apps": apps,
        }
    return result
