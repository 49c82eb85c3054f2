"""Synthetic users and their ground-truth behaviour towards items."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from switchrec.domain import FeatureValue, UserProfile
from switchrec.rng import user_stream


@dataclass(frozen=True)
class FeatureGenerator:
    """One feature's marginal distribution.

    ``kind`` is ``normal`` (mean, sd), ``uniform`` (low, high), ``lognormal``
    (mean, sd of the log) or ``categorical`` (values, weights). Numeric draws
    are clipped to ``[low_clip, high_clip]`` and optionally rounded; ``missing``
    is the probability the feature is absent.
    """

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)
    missing: float = 0.0

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FeatureGenerator":
        raw = dict(raw)
        kind = raw.pop("type")
        missing = float(raw.pop("missing", 0.0))
        return cls(kind, raw, missing)

    def sample(self, rng: np.random.Generator) -> FeatureValue | None:
        # the missing draw is always taken so streams stay aligned
        absent = rng.random() < self.missing
        p = self.params
        if self.kind == "categorical":
            values = list(p["values"])
            weights = np.asarray(p.get("weights", [1.0] * len(values)), dtype=float)
            value: FeatureValue = str(values[int(rng.choice(len(values), p=weights / weights.sum()))])
        else:
            if self.kind == "normal":
                x = rng.normal(float(p["mean"]), float(p["sd"]))
            elif self.kind == "uniform":
                x = rng.uniform(float(p["low"]), float(p["high"]))
            elif self.kind == "lognormal":
                x = rng.lognormal(float(p["mean"]), float(p["sd"]))
            else:
                raise ValueError(f"unknown feature generator {self.kind!r}")
            x = min(max(x, float(p.get("low_clip", -math.inf))), float(p.get("high_clip", math.inf)))
            value = float(round(x)) if p.get("round") else float(x)
        return None if absent else value


@dataclass(frozen=True)
class LogitModel:
    """``sigmoid(intercept + sum(w * (x - center)))``.

    Weight keys are numeric feature names or ``name=value`` indicators for
    categorical features. Missing numeric features contribute nothing.
    A model with no weights and ``constant`` set returns that constant.
    """

    intercept: float = 0.0
    weights: Mapping[str, float] = field(default_factory=dict)
    center: Mapping[str, float] = field(default_factory=dict)
    constant: float | None = None

    @classmethod
    def from_value(cls, raw) -> "LogitModel":
        if isinstance(raw, (int, float)):
            return cls(constant=float(raw))
        return cls(
            float(raw.get("intercept", 0.0)),
            dict(raw.get("weights", {})),
            dict(raw.get("center", {})),
            raw.get("constant"),
        )

    def __call__(self, features: Mapping[str, FeatureValue]) -> float:
        if self.constant is not None:
            return float(self.constant)
        z = self.intercept
        for key, w in self.weights.items():
            if "=" in key:
                name, level = key.split("=", 1)
                if str(features.get(name)) == level:
                    z += w
            else:
                x = features.get(key)
                if isinstance(x, (int, float)):
                    z += w * (float(x) - self.center.get(key, 0.0))
        return 1.0 / (1.0 + math.exp(-z))


@dataclass(frozen=True)
class ItemBehavior:
    """Ground truth for one item: click propensity multiplier and P(convert | click)."""

    relevance: LogitModel = field(default_factory=lambda: LogitModel(constant=1.0))
    conversion: LogitModel = field(default_factory=lambda: LogitModel(constant=1.0))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ItemBehavior":
        return cls(LogitModel.from_value(raw.get("relevance", 1.0)), LogitModel.from_value(raw.get("conversion", 1.0)))


@dataclass(frozen=True)
class PopulationSpec:
    """Desk-scale population.

    ``fatigue_decay`` switches on over-exposure fatigue: an item shown in ``c``
    consecutive earlier sessions has its relevance multiplied by
    ``(1 - fatigue_decay) ** c``. Off (0.0) by default.
    """

    n_users: int
    features: Mapping[str, FeatureGenerator]
    items: Mapping[str, ItemBehavior] = field(default_factory=dict)
    default_item: ItemBehavior = field(default_factory=ItemBehavior)
    opens_per_day: float = 1.0
    fatigue_decay: float = 0.0
    user_prefix: str = "u"

    def __post_init__(self) -> None:
        if self.n_users < 0 or self.opens_per_day < 0 or not 0.0 <= self.fatigue_decay < 1.0:
            raise ValueError("invalid population spec")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "PopulationSpec":
        return cls(
            n_users=int(raw["n_users"]),
            features={k: FeatureGenerator.from_dict(v) for k, v in raw.get("features", {}).items()},
            items={k: ItemBehavior.from_dict(v) for k, v in raw.get("items", {}).items()},
            default_item=ItemBehavior.from_dict(raw.get("default_item", {})),
            opens_per_day=float(raw.get("opens_per_day", 1.0)),
            fatigue_decay=float(raw.get("fatigue_decay", 0.0)),
            user_prefix=str(raw.get("user_prefix", "u")),
        )

    def behavior(self, item_id: str) -> ItemBehavior:
        return self.items.get(item_id, self.default_item)

    def user_ids(self) -> list[str]:
        width = max(1, len(str(max(self.n_users - 1, 0))))
        return [f"{self.user_prefix}{i:0{width}d}" for i in range(self.n_users)]


def generate_user(spec: PopulationSpec, user_id: str, seed: int) -> UserProfile:
    rng = user_stream(seed, user_id, "features")
    feats = {}
    for name in sorted(spec.features):
        value = spec.features[name].sample(rng)
        if value is not None:
            feats[name] = value
    return UserProfile(user_id, feats)


def generate_users(spec: PopulationSpec, seed: int) -> list[UserProfile]:
    return [generate_user(spec, uid, seed) for uid in spec.user_ids()]
