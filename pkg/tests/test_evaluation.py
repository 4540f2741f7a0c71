from __future__ import annotations


import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readweight.evaluation import (
    EvalReport,
    UndefinedAucError,
    activeness_level,
    auc,
    equal_frequency_boundaries,
    migration_csv,
    migration_report,
    relaimpr,
    weekly_click_counts,
)

from conftest import make_event

DAY = 86400


def brute_force_auc(scores, labels) -> float:
    """Quadratic pairwise oracle: wins plus half-ties over all pos-neg pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y != 1]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_two_pair_example(self):
        assert auc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5

    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert auc([0.5] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedAucError):
            auc([0.1, 0.2], [1, 1])
        with pytest.raises(UndefinedAucError):
            auc([0.1, 0.2], [0, 0])

    @given(
        st.lists(
            st.tuples(
                st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.5, 0.75, 1.0, 2.0]),
                st.integers(min_value=0, max_value=1),
            ),
            min_size=2,
            max_size=120,
        )
    )
    @settings(max_examples=200)
    def test_matches_brute_force_exactly(self, pairs):
        scores = [s for s, _ in pairs]
        labels = [y for _, y in pairs]
        if not (0 < sum(labels) < len(labels)):
            return
        assert auc(scores, labels) == brute_force_auc(scores, labels)

    def test_invariant_under_increasing_transform(self, rng):
        scores = rng.normal(size=500)
        scores[::7] = scores[::3][: len(scores[::7])]  # plant some ties
        labels = (rng.random(500) < 0.4).astype(int)
        base = auc(scores, labels)
        assert auc(3.0 * scores + 11.0, labels) == base
        assert auc(np.exp(scores / 4.0), labels) == base


class TestRelaImpr:
    @pytest.mark.parametrize(
        "value,expected",
        [(0.7849, 0.0139), (0.7932, 0.0434), (0.7968, 0.0562)],
    )
    def test_published_table(self, value, expected):
        assert relaimpr(value, 0.7810) == pytest.approx(expected, abs=1e-4)

    def test_self_comparison_is_zero(self):
        assert relaimpr(0.77, 0.77) == 0.0

    def test_base_at_random_rejected(self):
        with pytest.raises(ValueError):
            relaimpr(0.7, 0.5)
        with pytest.raises(ValueError):
            relaimpr(0.7, 0.49)

    def test_report_build(self):
        report = EvalReport.build([0.9, 0.2, 0.8], [1, 0, 1], base_auc=0.75)
        assert report.auc == 1.0
        assert report.relaimpr == pytest.approx(1.0, abs=1e-12)
        assert report.n_pos == 2 and report.n_neg == 1
        assert '"auc"' in report.to_json()


class TestActiveness:
    BOUNDS = (1, 3, 6, 10, 20, 40)

    def test_zero_clicks_level_one(self):
        assert activeness_level(0, self.BOUNDS) == 1

    def test_largest_boundary_maps_to_top(self):
        assert activeness_level(40, self.BOUNDS) == 7
        assert activeness_level(400, self.BOUNDS) == 7

    def test_monotone(self):
        levels = [activeness_level(c, self.BOUNDS) for c in range(0, 60)]
        assert levels == sorted(levels)

    def test_requires_ascending(self):
        with pytest.raises(ValueError):
            activeness_level(5, (1, 1, 2, 3, 4, 5))

    def test_equal_frequency_septiles(self, rng):
        counts = rng.integers(0, 200, size=14_000)
        boundaries = equal_frequency_boundaries(counts.tolist())
        assert len(boundaries) == 6
        assert list(boundaries) == sorted(set(boundaries))
        levels = np.array([activeness_level(int(c), boundaries) for c in counts])
        shares = np.bincount(levels, minlength=8)[1:] / len(counts)
        assert np.abs(shares - 1 / 7).max() < 0.01

    def test_boundaries_floor_at_one(self):
        # A zero-heavy population cannot push a boundary to 0.
        counts = [0] * 50 + list(range(1, 50))
        boundaries = equal_frequency_boundaries(counts)
        assert boundaries[0] >= 1
        assert activeness_level(0, boundaries) == 1


def migration_logs(shift=0.0):
    """Two-level population: light users u0..u9 (1 click), heavy u10..u19
    (30 clicks each)."""
    base_ts = 1_700_000_000
    events = []
    for u in range(10):
        events.append(make_event(f"l{u}", "i1", base_ts + u, True, 10.0 + u))
    for u in range(10):
        for k in range(30):
            events.append(
                make_event(f"h{u}", "i2", base_ts + k * 3600, True, 40.0 + u + k + shift)
            )
    return events


class TestMigration:
    def test_identical_logs_zero_delta(self):
        events = migration_logs()
        cells = migration_report(events, events, boundaries=(1, 2, 3, 4, 5, 29))
        filled = [c for c in cells if c.delta is not None]
        assert filled
        assert all(c.delta == 0.0 for c in filled)

    def test_uniform_shift_recovered(self):
        base = migration_logs()
        treat = [
            make_event(e.user_id, e.item_id, e.timestamp, e.clicked, e.dwell_time_s + 10.0)
            for e in base
        ]
        cells = migration_report(base, treat, boundaries=(1, 2, 3, 4, 5, 29))
        filled = [c for c in cells if c.delta is not None]
        assert filled
        for cell in filled:
            assert cell.delta == pytest.approx(10.0, abs=1e-9)

    def test_antisymmetric_with_fixed_boundaries(self):
        base = migration_logs()
        treat = [
            make_event(e.user_id, e.item_id, e.timestamp, e.clicked, e.dwell_time_s * 1.1)
            for e in base
        ]
        bounds = (1, 2, 3, 4, 5, 29)
        forward = migration_report(base, treat, bounds)
        backward = migration_report(treat, base, bounds)
        for f, b in zip(forward, backward):
            if f.delta is None:
                assert b.delta is None
            else:
                assert b.delta == -f.delta

    def test_empty_cells_marked(self):
        base = migration_logs()
        cells = migration_report(base, base, boundaries=(1, 2, 3, 4, 5, 29))
        top = [c for c in cells if c.activeness_level == 7]
        middle = [c for c in cells if c.activeness_level == 4]
        assert all(c.mean_dt_baseline is not None for c in top)
        assert all(c.mean_dt_baseline is None for c in middle)
        text = migration_csv(cells)
        assert "NA" in text
        assert text.splitlines()[0] == "level,decile,mean_base,mean_treat,delta"

    def test_requires_clicks(self):
        empty = [make_event(clicked=False, dwell_time_s=0.0)]
        with pytest.raises(ValueError):
            migration_report(empty, empty)

    def test_cell_ordering(self):
        events = migration_logs()
        cells = migration_report(events, events, boundaries=(1, 2, 3, 4, 5, 29))
        keys = [(c.activeness_level, c.dt_decile) for c in cells]
        assert keys == sorted(keys)
        assert len(cells) == 70


class TestWeeklyClicks:
    def test_window_anchored_at_log_end(self):
        base_ts = 1_700_000_000
        events = [
            make_event("u1", "i1", base_ts, True, 10.0),
            make_event("u1", "i1", base_ts + 9 * DAY, True, 10.0),
            make_event("u2", "i1", base_ts + 9 * DAY, False, 0.0),
        ]
        counts = weekly_click_counts(events)
        assert counts == {"u1": 1, "u2": 0}
