"""Usage-session construction: timeout merging per device, cross-device
grouping into multidevice sessions, and construction statistics.

Construction is a two-step process: first app sessions on each device are
merged greedily left-to-right whenever the gap to the previous session is at
most the timeout window; then usage sessions of different devices that link
(simultaneous, meeting, or preceding within the window) are collapsed into
multidevice sessions via connected components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, TextIO

from .ingest import AppSession, DEVICE_TYPES
from .intervals import AllenRelation, Interval, classify, link

PURE = "pure"
MIXED = "mixed"

# Relation keys used in the construction-statistics share tables.
PRECEDES_WITHIN_TW = "precedesWithinTW"
PRECEDED_BY_WITHIN_TW = "precededByWithinTW"


@dataclass
class UsageSession:
    """A maximal run of app sessions on one device under the timeout window."""

    id: str
    user_id: str
    device_id: str
    device_type: str
    app_sessions: list[AppSession]
    interval: Interval
    purity: str = PURE

    @property
    def interaction_seconds(self) -> int:
        return sum(s.interval.duration for s in self.app_sessions)


@dataclass
class MultideviceSession:
    """A connected component of usage sessions spanning both device types."""

    id: str
    user_id: str
    members: list[UsageSession]
    interval: Interval

    @property
    def app_session_count(self) -> int:
        return sum(len(m.app_sessions) for m in self.members)

    @property
    def interaction_seconds(self) -> int:
        return sum(m.interaction_seconds for m in self.members)

    def app_sessions(self, device_type: str | None = None) -> list[AppSession]:
        out = []
        for m in self.members:
            if device_type is None or m.device_type == device_type:
                out.extend(m.app_sessions)
        return out


@dataclass
class ConstructionStats:
    counts: dict[str, dict[str, int]]
    relation_shares: dict[str, dict[str, float]]


def build_usage_sessions(
    app_sessions: Iterable[AppSession], tw: int
) -> list[UsageSession]:
    """Greedy left-to-right merge of normalized app sessions, per device.

    An app session joins the current usage session iff it meets or follows
    the previous one with a gap of at most ``tw`` seconds (inclusive).
    """
    per_device: dict[tuple[str, str], list[AppSession]] = {}
    for s in app_sessions:
        if s.device_type not in DEVICE_TYPES:
            raise ValueError(f"unsupported device type: {s.device_type!r}")
        per_device.setdefault((s.user_id, s.device_id), []).append(s)

    out: list[UsageSession] = []
    for (user_id, device_id) in sorted(per_device):
        ordered = sorted(per_device[(user_id, device_id)], key=lambda s: s.interval.start)
        runs: list[list[AppSession]] = []
        for s in ordered:
            if runs and s.interval.start - runs[-1][-1].interval.end <= tw:
                runs[-1].append(s)
            else:
                runs.append([s])
        for i, run in enumerate(runs):
            out.append(
                UsageSession(
                    id=f"{user_id}/{device_id}/u{i}",
                    user_id=user_id,
                    device_id=device_id,
                    device_type=run[0].device_type,
                    app_sessions=run,
                    interval=Interval(run[0].interval.start, run[-1].interval.end),
                )
            )
    return out


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def build_multidevice_sessions(
    usage_sessions: list[UsageSession], tw: int
) -> tuple[list[MultideviceSession], list[UsageSession]]:
    """Group usage sessions into multidevice sessions per user.

    Edges exist only between sessions of different devices that link under
    ``tw``; components containing at least two device types become
    multidevice sessions and their members are marked mixed.
    """
    by_user: dict[str, list[UsageSession]] = {}
    for us in usage_sessions:
        us.purity = PURE
        by_user.setdefault(us.user_id, []).append(us)

    md_sessions: list[MultideviceSession] = []
    for user_id in sorted(by_user):
        sessions = sorted(by_user[user_id], key=lambda s: (s.interval.start, s.id))
        uf = _UnionFind(len(sessions))
        # Sessions are sorted by start; once the gap to every later session
        # exceeds tw there is nothing more to link.
        for i, a in enumerate(sessions):
            for j in range(i + 1, len(sessions)):
                b = sessions[j]
                if b.interval.start - a.interval.end > tw:
                    break
                if a.device_id == b.device_id:
                    continue
                if link(a.interval, b.interval, tw).linked:
                    uf.union(i, j)
        components: dict[int, list[UsageSession]] = {}
        for i, s in enumerate(sessions):
            components.setdefault(uf.find(i), []).append(s)
        md_index = 0
        for root in sorted(components, key=lambda r: components[r][0].interval.start):
            members = components[root]
            if len({m.device_type for m in members}) < 2:
                continue
            for m in members:
                m.purity = MIXED
            hull = Interval(
                min(m.interval.start for m in members),
                max(m.interval.end for m in members),
            )
            md_sessions.append(
                MultideviceSession(
                    id=f"{user_id}/md{md_index}",
                    user_id=user_id,
                    members=members,
                    interval=hull,
                )
            )
            md_index += 1
    return md_sessions, usage_sessions


def _tw_relation_key(a: Interval, b: Interval, tw: int) -> str | None:
    """Relation name with the within-TW refinement for disjoint intervals.

    Returns None when the intervals are disjoint beyond the window (the
    "no relation" case of the construction statistics).
    """
    verdict = link(a, b, tw)
    if verdict.relation is AllenRelation.PRECEDES:
        return PRECEDES_WITHIN_TW if verdict.linked else None
    if verdict.relation is AllenRelation.PRECEDED_BY:
        return PRECEDED_BY_WITHIN_TW if verdict.linked else None
    return verdict.relation.value


def construction_stats(
    app_sessions: list[AppSession],
    usage_sessions: list[UsageSession],
    md_sessions: list[MultideviceSession],
    tw: int,
) -> ConstructionStats:
    """Construction counts and relation-share tables.

    Single-device shares count, for every adjacent same-device app-session
    pair that is within the timeout window, the relation in both directions.
    Multidevice shares count every (smartphone, tablet) usage-session pair
    within one multidevice session, oriented smartphone-relation-tablet.
    """
    counts = {
        dt: {
            "app_sessions": sum(1 for s in app_sessions if s.device_type == dt),
            "usage_sessions": sum(1 for s in usage_sessions if s.device_type == dt),
        }
        for dt in DEVICE_TYPES
    }
    counts["multidevice"] = {
        "app_sessions": sum(m.app_session_count for m in md_sessions),
        "usage_sessions": sum(len(m.members) for m in md_sessions),
        "multidevice_sessions": len(md_sessions),
    }

    shares: dict[str, dict[str, float]] = {}
    for dt in DEVICE_TYPES:
        tally: dict[str, int] = {}
        per_device: dict[tuple[str, str], list[AppSession]] = {}
        for s in app_sessions:
            if s.device_type == dt:
                per_device.setdefault((s.user_id, s.device_id), []).append(s)
        for sessions in per_device.values():
            ordered = sorted(sessions, key=lambda s: s.interval.start)
            for a, b in zip(ordered, ordered[1:]):
                for x, y in ((a, b), (b, a)):
                    key = _tw_relation_key(x.interval, y.interval, tw)
                    if key is not None:
                        tally[key] = tally.get(key, 0) + 1
        shares[dt] = _to_percentages(tally)

    md_tally: dict[str, int] = {}
    for md in md_sessions:
        phones = [m for m in md.members if m.device_type == "smartphone"]
        tablets = [m for m in md.members if m.device_type == "tablet"]
        for p in phones:
            for t in tablets:
                key = _tw_relation_key(p.interval, t.interval, tw)
                if key is None:
                    key = classify(p.interval, t.interval).value
                md_tally[key] = md_tally.get(key, 0) + 1
    shares["multidevice"] = _to_percentages(md_tally)

    return ConstructionStats(counts=counts, relation_shares=shares)


def _to_percentages(tally: dict[str, int]) -> dict[str, float]:
    total = sum(tally.values())
    if total == 0:
        return {}
    return {k: 100.0 * v / total for k, v in sorted(tally.items())}


def write_usage_sessions_jsonl(sessions: Iterable[UsageSession], stream: TextIO) -> None:
    for s in sessions:
        stream.write(
            json.dumps(
                {
                    "id": s.id,
                    "user_id": s.user_id,
                    "device_id": s.device_id,
                    "device_type": s.device_type,
                    "start": s.interval.start,
                    "end": s.interval.end,
                    "purity": s.purity,
                    "app_sessions": [
                        {
                            "app_id": a.app_id,
                            "app_category": a.app_category,
                            "start": a.interval.start,
                            "end": a.interval.end,
                        }
                        for a in s.app_sessions
                    ],
                },
                sort_keys=True,
            )
            + "\n"
        )


def write_md_sessions_jsonl(sessions: Iterable[MultideviceSession], stream: TextIO) -> None:
    for s in sessions:
        stream.write(
            json.dumps(
                {
                    "id": s.id,
                    "user_id": s.user_id,
                    "start": s.interval.start,
                    "end": s.interval.end,
                    "members": [m.id for m in s.members],
                },
                sort_keys=True,
            )
            + "\n"
        )
