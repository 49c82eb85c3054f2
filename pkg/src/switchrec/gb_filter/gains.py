"""Cumulative gains curves and threshold selection.

Users are ranked by descending score. A point ``(impacted_fraction, recall)``
says that targeting the top ``impacted_fraction`` of users reaches ``recall``
of all converters. Users with equal scores are never separated, so each
distinct score contributes one point.

Every point carries the score threshold that reproduces it under the strict
rule ``score > threshold``: the highest score left out. The origin uses the
maximum score and the final point uses ``-inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class GainsPoint:
    impacted_fraction: float
    recall: float
    threshold: float


@dataclass(frozen=True)
class GainsCurve:
    points: tuple[GainsPoint, ...]
    n: int
    positives: int

    def __post_init__(self) -> None:
        pts = self.points
        if not pts or (pts[0].impacted_fraction, pts[0].recall) != (0.0, 0.0):
            raise ValueError("gains curve must start at (0, 0)")
        if (pts[-1].impacted_fraction, pts[-1].recall) != (1.0, 1.0):
            raise ValueError("gains curve must end at (1, 1)")
        for a, b in zip(pts, pts[1:]):
            if b.impacted_fraction < a.impacted_fraction or b.recall < a.recall:
                raise ValueError("gains curve coordinates must be nondecreasing")

    @property
    def impacted(self) -> np.ndarray:
        return np.array([p.impacted_fraction for p in self.points])

    @property
    def recall(self) -> np.ndarray:
        return np.array([p.recall for p in self.points])

    def lift(self) -> np.ndarray:
        x, r = self.impacted[1:], self.recall[1:]
        return r / x


def gains_curve(scores: Sequence[float], labels: Sequence[int]) -> GainsCurve:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.size == 0 or scores.size != labels.size:
        raise ValueError("scores and labels must be nonempty and of equal length")
    total_pos = int(labels.sum())
    if total_pos == 0:
        raise ValueError("no positive labels: recall is undefined")
    n = scores.size
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    cum_pos = np.cumsum(labels[order])
    # last index of each run of equal scores
    ends = np.append(np.nonzero(s[1:] != s[:-1])[0], n - 1)
    points = [GainsPoint(0.0, 0.0, float(s[0]))]
    for k, end in enumerate(ends):
        below = float(s[end + 1]) if end + 1 < n else -math.inf
        points.append(GainsPoint((end + 1) / n, int(cum_pos[end]) / total_pos, below))
    return GainsCurve(tuple(points), n, total_pos)


@dataclass(frozen=True)
class MinRecall:
    target: float


@dataclass(frozen=True)
class MaxImpacted:
    budget: float


Policy = Union[MinRecall, MaxImpacted]


@dataclass(frozen=True)
class ThresholdChoice:
    threshold: float
    recall: float
    impacted_fraction: float

    def as_row(self, item_id: str) -> dict[str, object]:
        return {
            "item": item_id,
            "threshold": self.threshold,
            "recall": self.recall,
            "impacted_users": self.impacted_fraction,
        }


THRESHOLD_REPORT_COLUMNS = ("item", "threshold", "recall", "impacted_users")


class UnreachableTarget(ValueError):
    pass


def select_threshold(curve: GainsCurve, policy: Policy) -> ThresholdChoice:
    pts = curve.points
    if isinstance(policy, MinRecall):
        ok = [p for p in pts if p.recall >= policy.target]
        if not ok:
            raise UnreachableTarget(
                f"recall target {policy.target} unreachable; achievable recall is "
                f"[{pts[0].recall}, {pts[-1].recall}]"
            )
        best = min(ok, key=lambda p: p.impacted_fraction)
    elif isinstance(policy, MaxImpacted):
        ok = [p for p in pts if p.impacted_fraction <= policy.budget]
        if not ok:
            raise UnreachableTarget(
                f"impact budget {policy.budget} unreachable; achievable impacted fraction is "
                f"[{pts[0].impacted_fraction}, {pts[-1].impacted_fraction}]"
            )
        best = max(ok, key=lambda p: (p.recall, -p.impacted_fraction))
    else:
        raise TypeError(f"unknown policy {policy!r}")
    return ThresholdChoice(best.threshold, best.recall, best.impacted_fraction)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties get half credit)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    ranks = np.empty(s.size)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        ranks[i : j + 1] = 0.5 * (i + j) + 1.0
        i = j + 1
    r = np.empty_like(ranks)
    r[order] = ranks
    return float((r[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
