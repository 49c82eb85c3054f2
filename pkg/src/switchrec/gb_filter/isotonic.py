"""Isotonic calibration via pool-adjacent-violators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def pava(y: Sequence[float], w: Sequence[float] | None = None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit to ``y`` (already in x order)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    if y.size == 0:
        return y.copy()
    # stack of blocks: (weighted mean, total weight, length)
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        weights.append(float(wi))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, n1 = means.pop(), weights.pop(), sizes.pop()
            wt = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt if wt > 0 else 0.5 * (m1 + m2))
            weights.append(wt)
            sizes.append(n1 + n2)
    return np.repeat(means, sizes)


@dataclass(frozen=True)
class IsotonicMap:
    """Step function through ``(raw_score, calibrated_prob)`` knots.

    A raw score takes the value of the largest knot at or below it; scores
    outside the knot range clamp to the boundary knots.
    """

    scores: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        s = np.asarray(self.scores)
        p = np.asarray(self.probs)
        if s.size == 0 or s.size != p.size:
            raise ValueError("need a nonempty, equal number of scores and probs")
        if np.any(np.diff(s) < 0) or np.any(np.diff(p) < 0):
            raise ValueError("knots must be nondecreasing in both coordinates")

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.scores, self.probs))

    def __call__(self, raw):
        return calibrate(self, raw)


def fit_isotonic(pairs: Sequence[tuple[float, float]], weights: Sequence[float] | None = None) -> IsotonicMap:
    """Fit a monotone map from raw scores to observed targets (usually 0/1 labels).

    Tied scores are pooled before PAVA so each distinct score gets one knot.
    """
    if len(pairs) < 2:
        raise ValueError("fit_isotonic needs at least two pairs")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(x, kind="stable")
    x, y, w = x[order], y[order], w[order]
    ux, start = np.unique(x, return_index=True)
    wsum = np.add.reduceat(w, start)
    ysum = np.add.reduceat(w * y, start)
    fitted = pava(ysum / wsum, wsum)
    # tiny negative drift from averaging must not break monotonicity
    fitted = np.maximum.accumulate(fitted)
    if np.all((y >= 0) & (y <= 1)):
        fitted = np.clip(fitted, 0.0, 1.0)
    return IsotonicMap(tuple(float(v) for v in ux), tuple(float(v) for v in fitted))


def calibrate(iso: IsotonicMap, raw):
    """Calibrated probability for a raw score (scalar or array)."""
    s = np.asarray(iso.scores)
    p = np.asarray(iso.probs)
    idx = np.searchsorted(s, np.asarray(raw, dtype=float), side="right") - 1
    out = p[np.clip(idx, 0, s.size - 1)]
    return float(out) if np.ndim(out) == 0 else out


def expected_calibration_error(probs: Sequence[float], labels: Sequence[int], n_bins: int = 10) -> float:
    """ECE over equal-count bins of the predicted probability."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    order = np.argsort(probs, kind="stable")
    total = 0.0
    for chunk in np.array_split(order, n_bins):
        if chunk.size:
            total += chunk.size * abs(probs[chunk].mean() - labels[chunk].mean())
    return total / probs.size
