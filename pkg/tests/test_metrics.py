import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propfuse.errors import DegenerateClassesError, EmptyConfusionError
from propfuse.metrics import (
    METRIC_IDS,
    ConfusionCounts,
    auc,
    epars,
    epars_expansion,
    metric,
)

counts_strategy = st.builds(
    ConfusionCounts,
    tp=st.floats(0.0, 1e4),
    tn=st.floats(0.0, 1e4),
    fp=st.floats(0.0, 1e4),
    fn=st.floats(0.0, 1e4),
).filter(lambda c: c.total > 0)

positive_counts_strategy = st.builds(
    ConfusionCounts,
    tp=st.floats(0.5, 1e4),
    tn=st.floats(0.5, 1e4),
    fp=st.floats(0.5, 1e4),
    fn=st.floats(0.5, 1e4),
)


class TestBasicFormulas:
    def test_metric_id_list_is_exhaustive(self):
        assert len(METRIC_IDS) == 14
        assert len(set(METRIC_IDS)) == 14

    def test_degenerate_high_accuracy_row(self):
        # A flow with zero true positives still scores ~90% accuracy when
        # negatives dominate; recall and the product metric stay at zero.
        c = ConfusionCounts(tp=0.0, tn=90.1, fp=0.0, fn=9.87)
        assert metric("accuracy", c) == pytest.approx(0.901, abs=1e-3)
        assert metric("recall", c) == 0.0
        assert metric("epars", c) == 0.0
        assert metric("mcc", c) == 0.0

    def test_recall_with_zero_false_negatives_is_one(self):
        c = ConfusionCounts(tp=2.12, tn=82.1, fp=15.8, fn=0.0)
        assert metric("recall", c) == pytest.approx(1.0)

    def test_perfect_classifier_scores_one_everywhere(self):
        c = ConfusionCounts(tp=50, tn=50, fp=0, fn=0)
        for metric_id in METRIC_IDS:
            assert metric(metric_id, c) == pytest.approx(1.0)

    def test_chance_level_correlations_are_zero(self):
        c = ConfusionCounts(tp=25, tn=25, fp=25, fn=25)
        assert metric("mcc", c) == pytest.approx(0.0)
        assert metric("cohens_kappa", c) == pytest.approx(0.0)

    def test_empty_confusion_rejected(self):
        with pytest.raises(EmptyConfusionError):
            metric("accuracy", ConfusionCounts(0, 0, 0, 0))
        with pytest.raises(EmptyConfusionError):
            epars(ConfusionCounts(0, 0, 0, 0))

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            metric("f2", ConfusionCounts(1, 1, 1, 1))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(-1, 0, 0, 0)

    def test_zero_denominator_factors_evaluate_to_zero(self):
        c = ConfusionCounts(tp=0, tn=10, fp=0, fn=0)
        assert metric("precision", c) == 0.0
        assert metric("recall", c) == 0.0
        assert metric("f1", c) == 0.0


class TestEpars:
    def test_strong_flow_value(self):
        c = ConfusionCounts(tp=1.97, tn=97.7, fp=0.19, fn=0.16)
        assert epars(c) == pytest.approx(0.839, abs=2e-3)

    def test_false_positive_heavy_flow_value(self):
        c = ConfusionCounts(tp=2.13, tn=34.0, fp=63.8, fn=0.0)
        assert epars(c) == pytest.approx(0.0040, abs=2e-4)

    def test_zero_tp_kills_the_product(self):
        assert epars(ConfusionCounts(tp=0, tn=123, fp=0, fn=4)) == 0.0

    def test_matches_factor_product(self):
        c = ConfusionCounts(tp=7, tn=41, fp=3, fn=2)
        expected = (
            metric("precision", c)
            * metric("accuracy", c)
            * metric("recall", c)
            * metric("specificity", c)
        )
        assert epars(c) == pytest.approx(expected, rel=1e-12)

    @given(positive_counts_strategy)
    def test_expansion_equivalence(self, c):
        assert epars(c) == pytest.approx(epars_expansion(c), rel=1e-9, abs=1e-15)

    @given(counts_strategy)
    def test_never_exceeds_any_factor(self, c):
        value = epars(c)
        for factor in ("precision", "accuracy", "recall", "specificity"):
            assert value <= metric(factor, c) + 1e-12


class TestInvariants:
    @given(counts_strategy, st.floats(1e-3, 1e3))
    @settings(max_examples=200)
    def test_scale_invariance(self, c, lam):
        for metric_id in METRIC_IDS:
            a = metric(metric_id, c)
            b = metric(metric_id, c.scaled(lam))
            assert a == pytest.approx(b, rel=1e-9, abs=1e-9)

    @given(counts_strategy)
    def test_bounds(self, c):
        for metric_id in METRIC_IDS:
            value = metric(metric_id, c)
            if metric_id in ("mcc", "cohens_kappa"):
                assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12
            else:
                assert -1e-12 <= value <= 1.0 + 1e-12

    def test_vote_indicator_auc_equals_balanced_accuracy(self):
        c = ConfusionCounts(tp=30, tn=50, fp=10, fn=20)
        assert metric("auc", c) == pytest.approx(metric("balanced_accuracy", c))


def brute_force_auc(pairs):
    # Exhaustive pairwise comparison, ties counted half.
    pos = [s for s, p in pairs if p]
    neg = [s for s, p in pairs if not p]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_separation(self):
        pairs = [(0.9, True), (0.8, True), (0.2, False), (0.1, False)]
        assert auc(pairs) == pytest.approx(1.0)

    def test_all_ties(self):
        pairs = [(0.5, True), (0.5, False), (0.5, True), (0.5, False)]
        assert auc(pairs) == pytest.approx(0.5)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            scores = np.round(rng.uniform(0, 1, size=20), 2)  # rounding forces ties
            positives = rng.uniform(size=20) < 0.4
            if positives.all() or not positives.any():
                continue
            pairs = list(zip(scores.tolist(), positives.tolist()))
            assert auc(pairs) == pytest.approx(brute_force_auc(pairs))

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(DegenerateClassesError):
            auc([(0.3, True), (0.4, True)])
        with pytest.raises(DegenerateClassesError):
            auc([(0.3, False)])
