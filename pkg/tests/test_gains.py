import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchrec.gb_filter import (
    THRESHOLD_REPORT_COLUMNS,
    MaxImpacted,
    MinRecall,
    ThresholdChoice,
    UnreachableTarget,
    gains_curve,
    select_threshold,
)

from oracles import gains_by_enumeration, threshold_by_enumeration

FOUR_SCORES = [0.9, 0.8, 0.4, 0.2]
FOUR_LABELS = [1, 1, 0, 1]


def test_four_sample_points():
    curve = gains_curve(FOUR_SCORES, FOUR_LABELS)
    pts = [(p.impacted_fraction, p.recall) for p in curve.points]
    assert pts == pytest.approx([(0, 0), (0.25, 1 / 3), (0.5, 2 / 3), (0.75, 2 / 3), (1.0, 1.0)])
    assert [p.threshold for p in curve.points] == [0.9, 0.8, 0.4, 0.2, -math.inf]


def test_perfect_classifier_reaches_full_recall_at_base_rate():
    labels = [1] * 30 + [0] * 70
    scores = np.linspace(1, 0, 100)
    curve = gains_curve(scores, labels)
    first_full = min(p.impacted_fraction for p in curve.points if p.recall == 1.0)
    assert first_full == pytest.approx(0.3)
    choice = select_threshold(curve, MinRecall(1.0))
    assert choice.impacted_fraction == pytest.approx(0.3)
    assert choice.recall == 1.0


def test_random_scores_follow_diagonal():
    rng = np.random.default_rng(0)
    n = 10_000
    curve = gains_curve(rng.random(n), (rng.random(n) < 0.2).astype(int))
    assert np.max(np.abs(curve.recall - curve.impacted)) < 0.1


def test_ties_grouped():
    curve = gains_curve([0.5, 0.5, 0.5, 0.1], [1, 0, 1, 0])
    assert [(p.impacted_fraction, p.recall) for p in curve.points] == [(0, 0), (0.75, 1.0), (1.0, 1.0)]


def test_zero_positives_rejected():
    with pytest.raises(ValueError, match="recall"):
        gains_curve([0.1, 0.2], [0, 0])


def test_min_recall_on_four_samples():
    choice = select_threshold(gains_curve(FOUR_SCORES, FOUR_LABELS), MinRecall(0.5))
    assert choice.impacted_fraction == 0.5
    assert choice.recall == pytest.approx(2 / 3)
    # strict rule with the reported threshold reproduces the point
    assert sum(s > choice.threshold for s in FOUR_SCORES) == 2


def test_max_impacted_on_four_samples():
    choice = select_threshold(gains_curve(FOUR_SCORES, FOUR_LABELS), MaxImpacted(0.8))
    assert (choice.impacted_fraction, choice.recall) == (0.5, pytest.approx(2 / 3))


def test_unreachable_target_lists_range():
    with pytest.raises(UnreachableTarget, match=r"\[0.0, 1.0\]"):
        select_threshold(gains_curve(FOUR_SCORES, FOUR_LABELS), MinRecall(1.5))
    with pytest.raises(UnreachableTarget):
        select_threshold(gains_curve(FOUR_SCORES, FOUR_LABELS), MaxImpacted(-0.1))


def test_report_schema_mirrors_threshold_table():
    row = ThresholdChoice(0.10, 0.88, 0.206).as_row("Credit Card")
    assert tuple(row) == THRESHOLD_REPORT_COLUMNS == ("item", "threshold", "recall", "impacted_users")
    assert row == {"item": "Credit Card", "threshold": 0.10, "recall": 0.88, "impacted_users": 0.206}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 1)), min_size=1, max_size=60))
def test_curve_matches_enumeration(rows):
    scores = [s / 20 for s, _ in rows]
    labels = [y for _, y in rows]
    if sum(labels) == 0:
        labels[0] = 1
    curve = gains_curve(scores, labels)
    oracle = gains_by_enumeration(scores, labels)
    assert [(p.impacted_fraction, p.recall, p.threshold) for p in curve.points] == pytest.approx(oracle)
    recalls = curve.recall
    assert np.all(np.diff(recalls) >= 0)
    for target in (0.0, 0.3, 0.5, 0.9, 1.0):
        c = select_threshold(curve, MinRecall(target))
        t, r, f = threshold_by_enumeration(scores, labels, min_recall=target)
        assert (c.recall, c.impacted_fraction) == pytest.approx((r, f))
    for budget in (0.0, 0.2, 0.5, 1.0):
        c = select_threshold(curve, MaxImpacted(budget))
        t, r, f = threshold_by_enumeration(scores, labels, max_impacted=budget)
        assert (c.recall, c.impacted_fraction) == pytest.approx((r, f))
