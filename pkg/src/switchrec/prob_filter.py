"""Probabilistic display filter.

Each candidate promoted item is shown independently with a display
probability ``p``. The waiting time until first display is geometric, so the
chance an item is still unseen after ``ns`` app opens is ``(1 - p) ** ns``.
Fixing that starvation probability ``alpha`` and solving gives
``p = 1 - alpha ** (1 / ns)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _check_probability(name: str, value: float, *, low_open: bool = False, high_open: bool = False) -> None:
    if not (0.0 <= value <= 1.0) or (low_open and value == 0.0) or (high_open and value == 1.0):
        lo = "(" if low_open else "["
        hi = ")" if high_open else "]"
        raise ValueError(f"{name}={value!r} outside {lo}0, 1{hi}")


def _check_ns(ns: int) -> None:
    if isinstance(ns, bool) or int(ns) != ns or ns < 1:
        raise ValueError(f"ns must be a positive integer, got {ns!r}")


def display_probability(alpha: float, ns: int) -> float:
    """Display probability that leaves an item unseen after ``ns`` opens with probability ``alpha``.

    ``alpha == 0`` is rejected: it would force ``p == 1``, i.e. always show.
    """
    _check_probability("alpha", alpha, low_open=True)
    _check_ns(ns)
    return 1.0 - alpha ** (1.0 / ns)


def starvation_probability(p: float, ns: int) -> float:
    _check_probability("p", p, high_open=True)
    _check_ns(ns)
    return (1.0 - p) ** ns


@dataclass(frozen=True)
class ProbFilterParams:
    alpha: float
    ns: int
    p: float

    def __post_init__(self) -> None:
        _check_probability("alpha", self.alpha, low_open=True)
        _check_ns(self.ns)
        _check_probability("p", self.p, high_open=True)
        if abs(self.p - display_probability(self.alpha, self.ns)) > 1e-12:
            raise ValueError("p is inconsistent with (alpha, ns)")

    @classmethod
    def from_alpha(cls, alpha: float, ns: int) -> "ProbFilterParams":
        return cls(alpha, int(ns), display_probability(alpha, ns))

    @classmethod
    def from_p(cls, p: float, ns: int) -> "ProbFilterParams":
        alpha = starvation_probability(p, ns)
        # recompute p from alpha so the stored triple is self-consistent
        return cls(alpha, int(ns), display_probability(alpha, ns))


def sample_display(
    items: Sequence[tuple[str, float]],
    rng: np.random.Generator,
) -> list[str]:
    """Keep item ``i`` iff an independent uniform draw falls below ``p_i``.

    One uniform is drawn per item, in input order, so the result is a pure
    function of the generator state.
    """
    if not items:
        return []
    probs = [float(p) for _, p in items]
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError("display probabilities must lie in [0, 1]")
    draws = rng.random(len(items)).tolist()
    return [item_id for (item_id, _), u, p in zip(items, draws, probs) if u < p]


def sample_display_counts(probs: Sequence[float], n_trials: int, rng: np.random.Generator) -> np.ndarray:
    """Number of items displayed in each of ``n_trials`` independent opens."""
    p = np.asarray(probs, dtype=float)
    return (rng.random((n_trials, p.size)) < p).sum(axis=1)


@dataclass(frozen=True)
class CountDistribution:
    pmf: tuple[float, ...]
    mean: float

    def __post_init__(self) -> None:
        pmf = np.asarray(self.pmf)
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
            raise ValueError("pmf must be nonnegative and sum to 1")
        if abs(float(np.dot(np.arange(pmf.size), pmf)) - self.mean) > 1e-9:
            raise ValueError("mean disagrees with pmf")

    @property
    def variance(self) -> float:
        k = np.arange(len(self.pmf))
        return float(np.dot((k - self.mean) ** 2, self.pmf))


def count_distribution(p_list: Sequence[float]) -> CountDistribution:
    """Exact Poisson-binomial distribution of the number of displayed items.

    Built by convolving one Bernoulli at a time; O(m^2) which is plenty for a
    handful of promoted items.
    """
    pmf = np.zeros(len(p_list) + 1)
    pmf[0] = 1.0
    for m, p in enumerate(p_list, start=1):
        _check_probability("p", p)
        pmf[1 : m + 1] = pmf[1 : m + 1] * (1.0 - p) + pmf[:m] * p
        pmf[0] *= 1.0 - p
    mean = float(sum(p_list))
    return CountDistribution(tuple(float(x) for x in pmf), mean)
