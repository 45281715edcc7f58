"""Allen's thirteen interval relations plus the timeout-window linkage predicate.

All timestamps are integer seconds since the Unix epoch (UTC).  Intervals have
strictly positive duration, so every ordered pair of intervals satisfies
exactly one of the thirteen relations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class AllenRelation(str, Enum):
    PRECEDES = "precedes"
    MEETS = "meets"
    OVERLAPS = "overlaps"
    FINISHED_BY = "finishedBy"
    ENCLOSES = "encloses"
    STARTS = "starts"
    EQUIVALENT = "equivalent"
    STARTED_BY = "startedBy"
    ENCLOSED_BY = "enclosedBy"
    FINISHES = "finishes"
    OVERLAPPED_BY = "overlappedBy"
    MET_BY = "metBy"
    PRECEDED_BY = "precededBy"


# The six converse pairs; equivalent is self-converse.
_CONVERSE = {
    AllenRelation.PRECEDES: AllenRelation.PRECEDED_BY,
    AllenRelation.MEETS: AllenRelation.MET_BY,
    AllenRelation.OVERLAPS: AllenRelation.OVERLAPPED_BY,
    AllenRelation.FINISHED_BY: AllenRelation.FINISHES,
    AllenRelation.ENCLOSES: AllenRelation.ENCLOSED_BY,
    AllenRelation.STARTS: AllenRelation.STARTED_BY,
    AllenRelation.EQUIVALENT: AllenRelation.EQUIVALENT,
}
_CONVERSE.update({v: k for k, v in _CONVERSE.items()})

#: Relations that describe (at least partly) simultaneous intervals.
SIMULTANEOUS_RELATIONS = frozenset(
    {
        AllenRelation.OVERLAPS,
        AllenRelation.FINISHED_BY,
        AllenRelation.ENCLOSES,
        AllenRelation.STARTS,
        AllenRelation.EQUIVALENT,
        AllenRelation.STARTED_BY,
        AllenRelation.ENCLOSED_BY,
        AllenRelation.FINISHES,
        AllenRelation.OVERLAPPED_BY,
    }
)


@dataclass(frozen=True, order=True)
class Interval:
    """A finite time interval with integer endpoints, start < end."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError(f"interval start must be non-negative, got {self.start}")
        if self.start >= self.end:
            raise ValueError(
                f"interval must have positive duration, got [{self.start}, {self.end}]"
            )

    @property
    def duration(self) -> int:
        return self.end - self.start

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.start, other.start), max(self.end, other.end))


@dataclass(frozen=True)
class LinkVerdict:
    """Outcome of the timeout-window linkage test between two intervals.

    ``gap_seconds`` is present exactly when the relation is precedes or
    precededBy; meeting intervals have no gap by definition.
    """

    linked: bool
    relation: AllenRelation
    gap_seconds: Optional[int] = None


def classify(a: Interval, b: Interval) -> AllenRelation:
    """Return the unique Allen relation of ``a`` with respect to ``b``."""
    if a.end < b.start:
        return AllenRelation.PRECEDES
    if a.end == b.start:
        return AllenRelation.MEETS
    if a.start == b.end:
        return AllenRelation.MET_BY
    if a.start > b.end:
        return AllenRelation.PRECEDED_BY
    # From here the intervals share at least one instant of interior time.
    if a.start == b.start:
        if a.end == b.end:
            return AllenRelation.EQUIVALENT
        return AllenRelation.STARTS if a.end < b.end else AllenRelation.STARTED_BY
    if a.end == b.end:
        return AllenRelation.FINISHES if a.start > b.start else AllenRelation.FINISHED_BY
    if a.start < b.start:
        return AllenRelation.ENCLOSES if a.end > b.end else AllenRelation.OVERLAPS
    return AllenRelation.ENCLOSED_BY if a.end < b.end else AllenRelation.OVERLAPPED_BY


def converse(r: AllenRelation) -> AllenRelation:
    """Relation of b to a, given the relation of a to b."""
    return _CONVERSE[r]


def link(a: Interval, b: Interval, tw: int) -> LinkVerdict:
    """Decide whether two intervals belong together under timeout window ``tw``.

    Simultaneous and meeting intervals always link; disjoint intervals link
    iff their gap is at most ``tw`` seconds (boundary inclusive).
    """
    if tw < 0:
        raise ValueError(f"timeout window must be non-negative, got {tw}")
    rel = classify(a, b)
    if rel is AllenRelation.PRECEDES:
        gap = b.start - a.end
        return LinkVerdict(gap <= tw, rel, gap)
    if rel is AllenRelation.PRECEDED_BY:
        gap = a.start - b.end
        return LinkVerdict(gap <= tw, rel, gap)
    return LinkVerdict(True, rel)
