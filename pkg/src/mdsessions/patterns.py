"""Binary activity matrices for multidevice sessions, interval-sequence
similarity via the Frobenius norm, and nearest-prototype grouping.

A multidevice session maps to a 2-row binary matrix (row 0 smartphone,
row 1 tablet) with one column per second of the session hull.  Each matrix
is resized to 4 columns by linear interpolation and assigned to the nearest
of the 256 possible 2x4 binary prototypes; the prototype id is the 8-bit
integer of row 0's bits followed by row 1's.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Sequence, TextIO

import numpy as np

from .construction import MultideviceSession

PROTOTYPE_COLS = 4
N_PROTOTYPES = 2 ** (2 * PROTOTYPE_COLS)

_ROW_INDEX = {"smartphone": 0, "tablet": 1}


def prototype_matrix(group_id: int) -> np.ndarray:
    """The 2x4 binary matrix encoded by ``group_id`` (0-255)."""
    if not 0 <= group_id < N_PROTOTYPES:
        raise ValueError(f"prototype id out of range: {group_id}")
    bits = [(group_id >> (7 - i)) & 1 for i in range(8)]
    return np.array([bits[:4], bits[4:]], dtype=float)


def prototype_id(matrix: np.ndarray) -> int:
    """Inverse of :func:`prototype_matrix`."""
    m = np.asarray(matrix)
    if m.shape != (2, PROTOTYPE_COLS):
        raise ValueError(f"expected a 2x4 matrix, got shape {m.shape}")
    bits = [int(round(v)) for v in m.ravel()]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("prototype matrix must be binary")
    return int("".join(map(str, bits)), 2)


_PROTOTYPES = None


def _all_prototypes() -> np.ndarray:
    global _PROTOTYPES
    if _PROTOTYPES is None:
        _PROTOTYPES = np.stack([prototype_matrix(i) for i in range(N_PROTOTYPES)])
    return _PROTOTYPES


def to_matrix(mds: MultideviceSession, coverage: str = "half_open") -> np.ndarray:
    """Binary 2xN activity matrix over the session hull at 1s granularity.

    ``coverage`` selects the second-coverage convention: ``half_open`` marks
    seconds [start, end) of each app session (the internal default);
    ``closed`` marks [start, end] inclusive.
    """
    if coverage not in ("half_open", "closed"):
        raise ValueError(f"unknown coverage convention: {coverage!r}")
    extra = 1 if coverage == "closed" else 0
    origin = mds.interval.start
    cols = mds.interval.duration + extra
    m = np.zeros((2, cols), dtype=float)
    for member in mds.members:
        row = _ROW_INDEX[member.device_type]
        for app in member.app_sessions:
            lo = app.interval.start - origin
            hi = app.interval.end - origin + extra
            m[row, lo:hi] = 1.0
    return m


def resize(matrix: np.ndarray, target_cols: int) -> np.ndarray:
    """Resample each row to ``target_cols`` by linear interpolation.

    Rows are treated as samples at normalized positions j/(cols-1);
    single-column rows broadcast their value.  Resizing to the same length
    is the identity and values stay within [0, 1] for binary input.
    """
    if target_cols < 1:
        raise ValueError("target_cols must be >= 1")
    m = np.asarray(matrix, dtype=float)
    rows, cols = m.shape
    if cols == target_cols:
        return m.copy()
    if cols == 1:
        return np.repeat(m, target_cols, axis=1)
    src = np.linspace(0.0, 1.0, cols)
    dst = np.linspace(0.0, 1.0, target_cols)
    return np.stack([np.interp(dst, src, m[r]) for r in range(rows)])


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius norm of the element-wise difference."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def assign_group(matrix: np.ndarray) -> int:
    """Nearest-prototype id for a session matrix; ties go to the lowest id."""
    resized = resize(matrix, PROTOTYPE_COLS)
    diffs = _all_prototypes() - resized[None, :, :]
    d2 = np.einsum("kij,kij->k", diffs, diffs)
    return int(np.argmin(d2))


def group_frequencies(
    md_sessions: Sequence[MultideviceSession],
) -> tuple[dict[int, float], dict[int, float]]:
    """Overall and per-user-mean group shares, in percent.

    The overall share is over all sessions; the per-user figure averages
    each user's own share distribution with equal user weight.
    """
    if not md_sessions:
        raise ValueError("no multidevice sessions")
    assignments = [(m.user_id, assign_group(to_matrix(m))) for m in md_sessions]

    overall: dict[int, float] = {}
    for _, g in assignments:
        overall[g] = overall.get(g, 0.0) + 1.0
    overall = {g: 100.0 * n / len(assignments) for g, n in overall.items()}

    by_user: dict[str, list[int]] = {}
    for user, g in assignments:
        by_user.setdefault(user, []).append(g)
    per_user: dict[int, float] = {}
    for groups in by_user.values():
        for g in set(groups):
            share = 100.0 * groups.count(g) / len(groups)
            per_user[g] = per_user.get(g, 0.0) + share / len(by_user)
    return dict(sorted(overall.items())), dict(sorted(per_user.items()))


def _category_shares(
    md_sessions: Iterable[MultideviceSession], device_type: str
) -> dict[str, float]:
    seconds: dict[str, float] = {}
    for md in md_sessions:
        for app in md.app_sessions(device_type):
            seconds[app.app_category] = seconds.get(app.app_category, 0.0) + app.interval.duration
    total = sum(seconds.values())
    if total == 0:
        return {}
    return {c: v / total for c, v in seconds.items()}


def category_contrast(
    md_sessions: Sequence[MultideviceSession], group_id: int
) -> dict[str, dict[str, float]]:
    """Signed relative differences in normalized category usage between the
    sessions of one prototype group and its complement, per device type.

    The value for category c is (in_share - out_share) / out_share when the
    complement uses c, +1.0 when only the group uses it, and 0 when neither.
    """
    in_group = [m for m in md_sessions if assign_group(to_matrix(m)) == group_id]
    out_group = [m for m in md_sessions if assign_group(to_matrix(m)) != group_id]
    if not in_group:
        raise ValueError(f"group {group_id} has no sessions")
    if not out_group:
        raise ValueError(f"group {group_id} has an empty complement")

    result: dict[str, dict[str, float]] = {}
    for dt in _ROW_INDEX:
        inside = _category_shares(in_group, dt)
        outside = _category_shares(out_group, dt)
        contrast: dict[str, float] = {}
        for cat in sorted(set(inside) | set(outside)):
            s_in, s_out = inside.get(cat, 0.0), outside.get(cat, 0.0)
            if s_out > 0:
                contrast[cat] = (s_in - s_out) / s_out
            elif s_in > 0:
                contrast[cat] = 1.0
            else:
                contrast[cat] = 0.0
        result[dt] = contrast
    return result


def matrix_bits(group_id: int) -> str:
    return format(group_id, "08b")


def write_group_report_csv(
    overall: dict[int, float], per_user: dict[int, float], stream: TextIO
) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["group_id", "matrix_bits", "share_overall", "share_per_user_mean"])
    for gid in sorted(set(overall) | set(per_user)):
        writer.writerow(
            [gid, matrix_bits(gid),
             f"{overall.get(gid, 0.0):.4f}", f"{per_user.get(gid, 0.0):.4f}"]
        )


def write_group_report_json(
    overall: dict[int, float], per_user: dict[int, float], stream: TextIO
) -> None:
    json.dump(
        {
            "overall": {str(g): v for g, v in overall.items()},
            "per_user_mean": {str(g): v for g, v in per_user.items()},
        },
        stream,
        sort_keys=True,
        indent=2,
    )
    stream.write("\n")
