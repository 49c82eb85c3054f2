"""Position click model, single sessions, and the shuffled-slate experiment.

Clicks are position-independent draws: the item at slate position ``k``
(1-based) is clicked with probability ``position_ctr[k] * relevance(item)``.
There is no cascade coupling between positions. A clicked item converts with
its own conversion probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from switchrec.domain import SLATE_CAPACITY, VISIBLE_COUNT, Slate
from switchrec.simulator.stats import Z_95, wald_interval


@dataclass(frozen=True)
class PositionClickModel:
    position_ctr: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.position_ctr) != SLATE_CAPACITY:
            raise ValueError(f"need exactly {SLATE_CAPACITY} position CTRs")
        if any(not 0.0 <= c <= 1.0 for c in self.position_ctr):
            raise ValueError("position CTRs must lie in [0, 1]")

    @classmethod
    def visible_vs_tail(cls, visible_ctr: float, tail_ctr: float) -> "PositionClickModel":
        return cls(tuple([visible_ctr] * VISIBLE_COUNT + [tail_ctr] * (SLATE_CAPACITY - VISIBLE_COUNT)))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "PositionClickModel":
        if "position_ctr" in raw:
            return cls(tuple(float(c) for c in raw["position_ctr"]))
        return cls.visible_vs_tail(float(raw["visible_ctr"]), float(raw["tail_ctr"]))

    @property
    def visible(self) -> tuple[bool, ...]:
        return tuple(k < VISIBLE_COUNT for k in range(SLATE_CAPACITY))


@dataclass(frozen=True)
class SessionOutcome:
    clicks: frozenset[tuple[int, str]]  # (1-based position, item_id)
    conversions: frozenset[str]


def _probabilities(items: Sequence[str], click_model: PositionClickModel, relevance, conversion):
    ctr = np.asarray(click_model.position_ctr[: len(items)])
    rel = np.array([relevance.get(i, 1.0) for i in items]) if relevance is not None else 1.0
    conv = np.array([conversion.get(i, 1.0) for i in items]) if conversion is not None else 1.0
    click_p = ctr * rel
    if np.any((click_p < 0) | (click_p > 1)):
        raise ValueError("click probabilities must lie in [0, 1]")
    return click_p, np.broadcast_to(conv, click_p.shape)


def simulate_session(
    slate: Slate | Sequence[str],
    click_model: PositionClickModel,
    relevance: Mapping[str, float] | None,
    rng: np.random.Generator,
    conversion: Mapping[str, float] | None = None,
) -> SessionOutcome:
    """One app open. ``relevance`` scales the click probability, ``conversion``
    gives P(convert | click); items absent from either mapping use 1.0.

    Draws ``2 * len(slate)`` uniforms: all click draws, then all conversion draws.
    """
    items = list(slate)
    if len(items) > SLATE_CAPACITY:
        raise ValueError(f"slate longer than {SLATE_CAPACITY}")
    if not items:
        return SessionOutcome(frozenset(), frozenset())
    # plain floats: this runs once per simulated app open
    n = len(items)
    u = rng.random(2 * n).tolist()
    clicks, conversions = [], []
    for k, item in enumerate(items):
        p = click_model.position_ctr[k] * (relevance.get(item, 1.0) if relevance is not None else 1.0)
        if not 0.0 <= p <= 1.0:
            raise ValueError("click probabilities must lie in [0, 1]")
        if u[k] < p:
            clicks.append((k + 1, item))
            if u[n + k] < (conversion.get(item, 1.0) if conversion is not None else 1.0):
                conversions.append(item)
    return SessionOutcome(frozenset(clicks), frozenset(conversions))


def simulate_sessions(
    slate: Slate | Sequence[str],
    click_model: PositionClickModel,
    relevance: Mapping[str, float] | None,
    rng: np.random.Generator,
    n_sessions: int,
    conversion: Mapping[str, float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised repeat of :func:`simulate_session` on a fixed slate.

    Consumes the stream exactly like ``n_sessions`` sequential calls and returns
    boolean ``(n_sessions, len(slate))`` click and conversion matrices.
    """
    items = list(slate)
    if not items:
        return np.zeros((n_sessions, 0), bool), np.zeros((n_sessions, 0), bool)
    click_p, conv_p = _probabilities(items, click_model, relevance, conversion)
    u = rng.random((n_sessions, 2, len(items)))
    clicked = u[:, 0, :] < click_p
    return clicked, clicked & (u[:, 1, :] < conv_p)


@dataclass(frozen=True)
class PositionEstimate:
    position: int
    impressions: int
    clicks: int
    ctr: float
    ci_low: float
    ci_high: float
    visible: bool


@dataclass(frozen=True)
class ShuffleReport:
    positions: tuple[PositionEstimate, ...]
    no_data: bool = False

    def ctr(self) -> np.ndarray:
        return np.array([p.ctr for p in self.positions])

    def covers(self, truth: Sequence[float]) -> np.ndarray:
        return np.array([p.ci_low <= t <= p.ci_high for p, t in zip(self.positions, truth)])


def shuffled_slates(n_sessions: int, n_items: int, rng: np.random.Generator) -> np.ndarray:
    """Row ``s`` is a uniform random permutation of item indices ``0..n_items-1``."""
    base = np.broadcast_to(np.arange(n_items), (n_sessions, n_items))
    return rng.permuted(base, axis=1)


def run_shuffle_experiment(
    n_users: int,
    sessions_per_user: int,
    click_model: PositionClickModel,
    rng: np.random.Generator,
    item_relevance: Sequence[float] | None = None,
    chunk: int = 100_000,
) -> ShuffleReport:
    """Show a full slate in random order every session and estimate per-position CTR.

    ``item_relevance`` defaults to 1.0 for each of the 15 items, in which case
    the estimates target ``click_model.position_ctr`` directly. Intervals are
    Wald 95%.
    """
    if n_users < 0 or sessions_per_user < 0:
        raise ValueError("counts must be nonnegative")
    n_items = SLATE_CAPACITY
    rel = np.ones(n_items) if item_relevance is None else np.asarray(item_relevance, dtype=float)
    if rel.size != n_items:
        raise ValueError(f"need {n_items} item relevances")
    ctr = np.asarray(click_model.position_ctr)
    total = n_users * sessions_per_user
    if total == 0:
        return ShuffleReport((), no_data=True)
    clicks = np.zeros(n_items, dtype=np.int64)
    done = 0
    while done < total:
        m = min(chunk, total - done)
        perm = shuffled_slates(m, n_items, rng)
        clicks += (rng.random((m, n_items)) < ctr * rel[perm]).sum(axis=0)
        done += m
    estimates = []
    for k in range(n_items):
        lo, hi = wald_interval(int(clicks[k]), total, Z_95)
        estimates.append(
            PositionEstimate(k + 1, total, int(clicks[k]), float(clicks[k] / total), lo, hi, k < VISIBLE_COUNT)
        )
    return ShuffleReport(tuple(estimates))
