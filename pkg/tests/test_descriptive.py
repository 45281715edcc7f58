"""Descriptive statistics: summaries, shares, hourly bins, ECDFs, sweep."""

import math
import random

import pytest

from mdsessions.construction import build_multidevice_sessions, build_usage_sessions
from mdsessions.descriptive import (
    DEFAULT_TW_GRID,
    SESSION_CLASSES,
    active_span_days,
    category_share_report,
    empirical_cdf,
    hourly_distribution,
    per_user_summary,
    select_class,
    shifted_cdf,
    summarize,
    timeout_sweep,
    usage_shares,
)
from mdsessions.generator import PanelSpec, generate_sessions
from mdsessions.ingest import AppSession
from mdsessions.intervals import Interval

HOUR = 3600


def session(start, end, user="u1", device="phone", device_type="smartphone",
            app="a", cat="social"):
    return AppSession(user, device, device_type, "android", app, cat, Interval(start, end))


def build(sessions, tw=60):
    usage = build_usage_sessions(sessions, tw)
    md, usage = build_multidevice_sessions(usage, tw)
    return usage, md


@pytest.fixture(scope="module")
def synthetic_panel():
    spec = PanelSpec(md_users=6, nmd_users=0, days=6, prototype_quota={15: 0.2}, seed=99)
    return generate_sessions(spec)


class TestSummarize:
    def test_three_app_session_usage_session(self):
        sessions = [session(0, 10), session(20, 40, app="b"), session(50, 80, app="c")]
        usage, md = build(sessions)
        s = summarize(usage)
        assert s.n == 1
        assert s.length_mean == 80  # hull 0..80
        assert s.app_sessions_mean == 3
        assert s.interaction_seconds == 60

    def test_md_session_additivity(self):
        sessions = [
            session(0, 10), session(20, 40, app="b"),
            session(5, 30, device="tab", device_type="tablet", app="c"),
            session(45, 60, device="tab", device_type="tablet", app="d"),
            session(90, 100, device="tab", device_type="tablet", app="e"),
        ]
        usage, md = build(sessions)
        assert len(md) == 1
        s = summarize(md)
        assert s.app_sessions_mean == 5

    def test_empty_class_marker(self):
        s = summarize([])
        assert s.n == 0 and math.isnan(s.length_mean)


class TestUsageShares:
    def test_no_md_sessions(self):
        sessions = [session(0, 10), session(5000, 5010, device="tab", device_type="tablet")]
        usage, md = build(sessions)
        shares = usage_shares(usage, md)
        for denom in ("app_sessions", "usage_sessions", "interaction_time"):
            assert shares["by_purity"]["multidevice"][denom] == 0.0

    def test_equal_pure_split(self):
        sessions = [session(0, 100), session(5000, 5100, device="tab", device_type="tablet")]
        usage, md = build(sessions)
        shares = usage_shares(usage, md)
        assert shares["by_device"]["smartphone_all"]["interaction_time"] == pytest.approx(50.0)
        assert shares["by_purity"]["tablet_pure"]["interaction_time"] == pytest.approx(50.0)

    def test_partitions_sum_to_100(self, synthetic_panel):
        usage, md = build(synthetic_panel)
        shares = usage_shares(usage, md)
        for partition in shares.values():
            for denom in ("app_sessions", "usage_sessions", "interaction_time"):
                total = sum(cls[denom] for cls in partition.values())
                assert total == pytest.approx(100.0, abs=0.2)


class TestHourlyDistribution:
    def test_single_session_in_one_hour(self):
        sessions = [session(21 * HOUR + 100, 21 * HOUR + 700)]
        usage, _ = build(sessions)
        bins = hourly_distribution(usage, {})
        assert bins[21] == pytest.approx(100.0)

    def test_split_across_boundary(self):
        sessions = [session(21 * HOUR + 1800, 22 * HOUR + 1800)]
        usage, _ = build(sessions)
        bins = hourly_distribution(usage, {})
        assert bins[21] == pytest.approx(50.0)
        assert bins[22] == pytest.approx(50.0)

    def test_bins_sum_to_100(self, synthetic_panel):
        usage, md = build(synthetic_panel)
        bins = hourly_distribution(usage, {})
        assert sum(bins) == pytest.approx(100.0, abs=0.1)

    def test_offset_shifts_bin(self):
        sessions = [session(100, 700)]  # hour 0 UTC
        usage, _ = build(sessions)
        bins = hourly_distribution(usage, {"u1": -2 * HOUR})
        assert bins[22] == pytest.approx(100.0)

    def test_warns_without_offsets(self):
        usage, _ = build([session(0, 10)])
        with pytest.warns(UserWarning):
            hourly_distribution(usage)


class TestEmpiricalCdf:
    def test_single_value(self):
        assert empirical_cdf([5]) == [(5, 1.0)]

    def test_small_sample_quartiles(self):
        cdf = dict(empirical_cdf([1, 2, 3, 4]))
        assert cdf[2] == 0.5 and cdf[4] == 1.0

    def test_duplicates_collapse(self):
        assert empirical_cdf([2, 2, 3]) == [(2, pytest.approx(2 / 3)), (3, 1.0)]

    def test_shift_is_non_destructive(self):
        values = [10, 20]
        shifted = shifted_cdf(values, 60)
        assert shifted[0][0] == 70 and values == [10, 20]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_cdf([])

    def test_ks_distance_to_analytic_exponential(self):
        rng = random.Random(21)
        mean = 100.0
        values = [rng.expovariate(1 / mean) for _ in range(1000)]
        ks = max(
            abs(p - (1 - math.exp(-v / mean))) for v, p in empirical_cdf(values)
        )
        assert ks < 0.05


class TestPerUserSummary:
    def test_user_level_vs_session_level_differ(self):
        # User a: many short sessions; user b: one long session.  The
        # session-level median ignores users, the user-level one does not.
        sessions = [session(i * 1000, i * 1000 + 10, user="a", app=f"x{i}") for i in range(9)]
        sessions.append(session(100000, 100900, user="b"))
        usage, md = build(sessions)
        dataset = summarize(usage)
        per_user = per_user_summary(usage, sessions)
        assert dataset.length_median == 10
        assert per_user.length_median_mean == pytest.approx((10 + 900) / 2)

    def test_single_user_panel_matches_dataset_medians(self):
        sessions = [session(0, 100), session(5000, 5060)]
        usage, md = build(sessions)
        dataset = summarize(usage)
        per_user = per_user_summary(usage, sessions)
        assert per_user.length_median_mean == dataset.length_median

    def test_empty_returns_none(self):
        assert per_user_summary([], []) is None


class TestTimeoutSweep:
    def test_single_point_matches_default_run(self, synthetic_panel):
        points = timeout_sweep(synthetic_panel, [60])
        usage, md = build(synthetic_panel, 60)
        users = {s.user_id for s in synthetic_panel}
        expected = len(select_class(usage, md, "multidevice")) / len(users)
        assert points[0].mean_sessions_per_user["multidevice"] == pytest.approx(expected)

    def test_pure_counts_non_increasing(self, synthetic_panel):
        points = timeout_sweep(synthetic_panel, DEFAULT_TW_GRID)
        for cls in ("smartphone_pure", "tablet_pure"):
            values = [p.mean_sessions_per_user[cls] for p in points]
            assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))

    def test_app_sessions_per_usage_session_non_decreasing(self, synthetic_panel):
        points = timeout_sweep(synthetic_panel, DEFAULT_TW_GRID)
        values = [p.mean_app_sessions_per_usage_session for p in points]
        assert all(a <= b + 1e-9 for a, b in zip(values, values[1:]))


class TestCategoryShareReport:
    def test_single_category(self):
        report = category_share_report([session(0, 100)])
        assert report["smartphone"]["categories"] == {"social": 100.0}

    def test_shares_sum_to_100(self, synthetic_panel):
        report = category_share_report(synthetic_panel)
        for device in ("smartphone", "tablet"):
            cats = report[device]["categories"]
            assert sum(cats.values()) == pytest.approx(100.0, abs=0.1)
            apps = report[device]["apps"]
            assert sum(apps.values()) == pytest.approx(100.0, abs=0.1)

    def test_planted_ratio_recovered(self):
        sessions = [
            session(0, 200, cat="games"),
            session(1000, 1100, cat="video", app="v"),
        ]
        report = category_share_report(sessions)
        cats = report["smartphone"]["categories"]
        assert cats["games"] / cats["video"] == pytest.approx(2.0)


class TestActiveSpanDays:
    def test_minimum_one_day(self):
        days = active_span_days([session(0, 100)])
        assert days["u1"] == 1.0

    def test_span_computed_from_extremes(self):
        days = active_span_days([session(0, 100), session(4 * 86400, 4 * 86400 + 50)])
        assert days["u1"] == pytest.approx(4.0, abs=0.01)
