from __future__ import annotations

import math

import numpy as np
import pytest

from readweight.dwell_stats import fit_log_normal
from readweight.evaluation import weekly_click_counts
from readweight.events import serialize_event
from readweight.labeling import composition_report, label_log
from readweight.profiles import build_profiles
from readweight.simulate import (
    ItemClass,
        RuleMixConfig,
    SimConfig,
    analytic_click_rate,
    analytic_light_user_fraction,
    generate,
    generate_migration_pair,
    generate_rule_mix,
    short_read_lift,
    sidecar_csv,
)

SINGLE_CLASS = (ItemClass("only", 1.0, 4.003, 1.295),)


class TestOrganicGenerator:
    def test_deterministic(self):
        cfg = SimConfig(n_users=200, n_items=60, seed=5)
        a, sa = generate(cfg)
        b, sb = generate(cfg)
        assert [serialize_event(e) for e in a] == [serialize_event(e) for e in b]
        assert sidecar_csv(sa) == sidecar_csv(sb)

    def test_different_seeds_differ(self):
        assert generate(SimConfig(n_users=50, n_items=20, seed=1))[0] != generate(
            SimConfig(n_users=50, n_items=20, seed=2)
        )[0]

    def test_zero_click_probability(self):
        cfg = SimConfig(n_users=100, n_items=30, click_bias=-math.inf, seed=3)
        events, _ = generate(cfg)
        assert events
        assert not any(e.clicked for e in events)
        assert all(e.dwell_time_s == 0.0 for e in events)

    def test_stats_recover_configured_class(self):
        cfg = SimConfig(
            n_users=5000,
            n_items=400,
            click_bias=math.inf,
            item_classes=SINGLE_CLASS,
            affinity_dt_coef=0.0,
            seed=11,
        )
        events, _ = generate(cfg)
        clicks = sum(e.clicked for e in events)
        assert clicks > 100_000
        stats = fit_log_normal(events)
        assert stats.mu == pytest.approx(4.003, abs=0.02)
        assert stats.sigma == pytest.approx(1.295, abs=0.02)

    def test_click_rate_matches_quadrature(self):
        cfg = SimConfig(
            n_users=43_000,
            n_items=2500,
            latent_dim=4,
            user_scale=1.0,
            item_scale=0.5,
            click_bias=-1.5,
            seed=77,
        )
        events, _ = generate(cfg)
        assert len(events) > 950_000
        empirical = sum(e.clicked for e in events) / len(events)
        assert empirical == pytest.approx(analytic_click_rate(cfg), abs=0.01)

    def test_light_user_fraction_matches_mix(self):
        cfg = SimConfig(n_users=12_000, n_items=2500, item_scale=0.5, click_bias=-1.5, seed=77)
        events, _ = generate(cfg)
        counts = weekly_click_counts(events)
        empirical = sum(1 for c in counts.values() if c < 7) / len(counts)
        assert empirical == pytest.approx(analytic_light_user_fraction(cfg), abs=0.01)

    def test_per_class_ln_dt_mean(self):
        classes = (
            ItemClass("short", 0.5, 3.0, 0.9),
            ItemClass("long", 0.5, 5.0, 1.1),
        )
        cfg = SimConfig(
            n_users=10_000,
            n_items=600,
            click_bias=math.inf,
            affinity_dt_coef=0.0,
            item_classes=classes,
            seed=13,
        )
        events, sidecar = generate(cfg)
        by_class: dict[str, list[float]] = {"short": [], "long": []}
        for event, row in zip(events, sidecar):
            if event.clicked:
                by_class[row.item_class].append(math.log(event.dwell_time_s))
        for cls in classes:
            values = by_class[cls.name]
            assert len(values) > 100_000
            assert np.mean(values) == pytest.approx(cls.ln_dt_mean, abs=0.02)

    def test_sidecar_alignment_and_propensity(self):
        cfg = SimConfig(n_users=100, n_items=40, item_classes=SINGLE_CLASS, seed=9)
        events, sidecar = generate(cfg)
        assert len(events) == len(sidecar)
        for event, row in zip(events[:200], sidecar[:200]):
            assert (event.user_id, event.item_id) == (row.user_id, row.item_id)
            assert 0.0 <= row.vr_propensity <= 1.0
            assert 1 <= row.user_level <= 7
        # Single class, no affinity shift: propensity = P(lnT > ln 15).
        expected = 1 - 0.5 * (1 + math.erf((math.log(15) - 4.003) / (1.295 * math.sqrt(2))))
        assert sidecar[0].vr_propensity == pytest.approx(expected, abs=1e-9)

    def test_degenerate_configs_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n_users=0)
        with pytest.raises(ValueError):
            SimConfig(activeness_mix=(0.5, 0.5), impressions_per_level=(1, 2, 3))
        with pytest.raises(ValueError):
            SimConfig(activeness_mix=(0.5, 0.2, 0.1, 0.1, 0.05, 0.03, 0.01))


class TestRuleMixGenerator:
    def test_exact_mix_recovered_by_pipeline(self):
        cfg = RuleMixConfig(n_valid_reads=10_000, mix=(0.8, 0.1, 0.1), seed=3)
        corpus = generate_rule_mix(cfg)
        store = build_profiles(corpus.events)
        labeled = list(label_log(corpus.events, corpus.stats, store))
        report = composition_report(label for _, label in labeled)
        for source in ("T1", "T2", "T3"):
            assert report["valid_read_source_fractions"][source] == pytest.approx(
                corpus.analytic_mix[source], abs=0.01
            )
        assert report["counts"]["InvalidClick"] == corpus.analytic_counts["InvalidClick"]
        assert report["counts"]["NoiseClick"] == corpus.analytic_counts["NoiseClick"]
        assert report["counts"]["NotClicked"] == corpus.analytic_counts["NotClicked"]

    def test_alternate_mix(self):
        cfg = RuleMixConfig(n_valid_reads=6_000, mix=(0.6, 0.25, 0.15), seed=8)
        corpus = generate_rule_mix(cfg)
        store = build_profiles(corpus.events)
        labeled = list(label_log(corpus.events, corpus.stats, store))
        report = composition_report(label for _, label in labeled)
        for source in ("T1", "T2", "T3"):
            assert report["valid_read_source_fractions"][source] == pytest.approx(
                corpus.analytic_mix[source], abs=0.01
            )

    def test_deterministic(self):
        cfg = RuleMixConfig(n_valid_reads=2_000, seed=21)
        a = generate_rule_mix(cfg)
        b = generate_rule_mix(cfg)
        assert [serialize_event(e) for e in a.events] == [serialize_event(e) for e in b.events]

    def test_planted_stats_threshold(self):
        corpus = generate_rule_mix(RuleMixConfig(n_valid_reads=2_000, seed=2))
        assert corpus.stats.x_l == pytest.approx(15.0, rel=1e-12)

    def test_mix_must_sum_to_one(self):
        with pytest.raises(ValueError):
            RuleMixConfig(mix=(0.5, 0.2, 0.2))


class TestMigrationPair:
    def test_lift_is_monotone(self):
        grid = np.linspace(0, 300, 4000)
        lifted = [short_read_lift(t, 8.0, 40.0) for t in grid]
        assert all(a < b for a, b in zip(lifted, lifted[1:]))
        assert short_read_lift(0.0, 8.0, 40.0) == 8.0
        assert short_read_lift(300.0, 8.0, 40.0) == pytest.approx(300.0, abs=0.01)

    def test_pair_structure(self):
        pair = generate_migration_pair(SimConfig(n_users=400, n_items=120, seed=4))
        assert len(pair.baseline) == len(pair.treatment)
        assert pair.lifted_users
        base_clicks = [e.clicked for e in pair.baseline]
        treat_clicks = [e.clicked for e in pair.treatment]
        assert base_clicks == treat_clicks
        for b, t in zip(pair.baseline, pair.treatment):
            if not b.clicked or b.user_id not in pair.lifted_users:
                assert t.dwell_time_s == b.dwell_time_s
            elif b.dwell_time_s < 300.0:
                assert t.dwell_time_s > b.dwell_time_s
            else:
                # Past a few scale lengths the lift is below float resolution.
                assert t.dwell_time_s >= b.dwell_time_s

    def test_weekly_counts_unchanged(self):
        pair = generate_migration_pair(SimConfig(n_users=300, n_items=90, seed=6))
        assert weekly_click_counts(pair.baseline) == weekly_click_counts(pair.treatment)

    def test_shift_must_stay_below_scale(self):
        with pytest.raises(ValueError):
            generate_migration_pair(SimConfig(n_users=50, n_items=20, seed=1), shift_s=50, shift_scale_s=40)
