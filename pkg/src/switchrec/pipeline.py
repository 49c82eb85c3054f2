"""Switching hybrid recommender for promoted items.

Flow per user: rule eligibility, then a per-item switch between the
probabilistic filter (too few conversions to learn from) and the
gradient-boosting filter, then slate assembly with regular items.

Pipeline config is JSON; relative paths resolve against the config file::

    {
      "rules": "rules.txt",
      "imbalance_cutoff": 0.01,
      "capacity": 15,
      "regular": ["transfer", "sim_credit", "bills"],
      "items": {
        "credit_card": {"alpha": 0.1, "ns": 5, "positives": 420, "total": 20000,
                        "model": "credit_card.gbm", "threshold": 0.10},
        "open_banking": {"p": 0.37, "positives": 3, "total": 900}
      }
    }

An item gives either ``alpha``/``ns`` or a raw display probability ``p``
(``p`` may be 1.0 for always-show). ``threshold`` overrides the one stored in
the model artifact.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from switchrec.domain import SLATE_CAPACITY, Slate, UserProfile, assemble_slate, order_promoted
from switchrec.gb_filter.model import GBModel, MissingModelError, load_model
from switchrec.knowledge_base import RuleSet, eligible_items, load_rules
from switchrec.prob_filter import ProbFilterParams, sample_display
from switchrec.rng import user_stream

DEFAULT_IMBALANCE_CUTOFF = 0.01


class ConfigError(ValueError):
    pass


class FilterPath(enum.Enum):
    PROBABILISTIC = "probabilistic"
    GRADIENT_BOOSTING = "gradient_boosting"


@dataclass(frozen=True)
class ItemStats:
    item_id: str
    positives: int = 0
    total: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.positives <= self.total:
            raise ValueError(f"{self.item_id}: need 0 <= positives <= total")

    @property
    def positive_fraction(self) -> float:
        return self.positives / self.total if self.total else 0.0


def choose_filter(stats: ItemStats, cutoff: float = DEFAULT_IMBALANCE_CUTOFF) -> FilterPath:
    """Probabilistic path iff the positive fraction is strictly below ``cutoff``.

    The comparison is exact rational arithmetic on the decimal cutoff, so
    10/1000 against 0.01 lands on the boosting path. No samples at all is a
    cold start and goes to the probabilistic path.
    """
    if stats.total == 0:
        return FilterPath.PROBABILISTIC
    if Fraction(stats.positives, stats.total) < Fraction(repr(float(cutoff))):
        return FilterPath.PROBABILISTIC
    return FilterPath.GRADIENT_BOOSTING


@dataclass(frozen=True)
class ItemConfig:
    item_id: str
    display_p: float
    stats: ItemStats
    prob_params: ProbFilterParams | None = None
    model: GBModel | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.display_p <= 1.0:
            raise ConfigError(f"{self.item_id}: display probability must lie in [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    rules: RuleSet
    items: Mapping[str, ItemConfig]
    imbalance_cutoff: float = DEFAULT_IMBALANCE_CUTOFF
    capacity: int = SLATE_CAPACITY
    regular: tuple[str, ...] = ()
    source: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        missing = [i for i in self.rules.item_ids() if i not in self.items]
        if missing:
            raise ConfigError(f"rules reference items without filter parameters: {missing}")
        for item in self.items.values():
            if self.path_for(item.item_id) is FilterPath.GRADIENT_BOOSTING and item.model is None:
                raise ConfigError(
                    f"{item.item_id}: positive fraction {item.stats.positive_fraction:.4f} routes to the "
                    f"gradient-boosting filter but no model is configured"
                )
        if not 1 <= self.capacity <= SLATE_CAPACITY:
            raise ConfigError(f"capacity must lie in [1, {SLATE_CAPACITY}]")

    def path_for(self, item_id: str) -> FilterPath:
        return choose_filter(self.items[item_id].stats, self.imbalance_cutoff)

    def models(self) -> dict[str, GBModel]:
        return {k: v.model for k, v in self.items.items() if v.model is not None}


@dataclass(frozen=True)
class UserPlan:
    """The deterministic part of one user's recommendation.

    Eligibility and boosting-filter decisions depend only on the profile, so
    they are computed once; :meth:`draw` adds the probabilistic sampling.
    """

    eligible: tuple[str, ...]
    prob_items: tuple[tuple[str, float], ...]
    gb_scores: Mapping[str, float]
    regular: tuple[str, ...]
    capacity: int

    def draw(self, rng: np.random.Generator) -> Slate:
        shown = set(sample_display(self.prob_items, rng))
        survivors = [i for i in self.eligible if i in shown or i in self.gb_scores]
        promoted = order_promoted(survivors, self.gb_scores)
        taken = set(promoted)
        # a regular list may repeat a promoted id; the promoted slot wins
        regular = [r for r in self.regular if r not in taken]
        return assemble_slate(promoted, regular, self.capacity)


def plan_user(profile: UserProfile, config: PipelineConfig, regular: Sequence[str] | None = None) -> UserPlan:
    regular = config.regular if regular is None else tuple(regular)
    eligible = eligible_items(profile, config.rules)
    prob_items = []
    scores: dict[str, float] = {}
    for item_id in eligible:
        if config.path_for(item_id) is FilterPath.PROBABILISTIC:
            prob_items.append((item_id, config.items[item_id].display_p))
            continue
        model = config.items[item_id].model
        if model is None:
            raise MissingModelError(item_id)
        score = model.calibrated_score(profile)
        if score > model.threshold:
            scores[item_id] = score
    return UserPlan(tuple(eligible), tuple(prob_items), scores, tuple(regular), config.capacity)


def recommend(
    profile: UserProfile,
    config: PipelineConfig,
    regular: Sequence[str] | None,
    rng: np.random.Generator,
) -> Slate:
    """Build one user's slate.

    Probabilistic-path items consume one uniform each from ``rng`` in rule
    order. Surviving boosting-path items are ordered by calibrated score and
    placed ahead of the probabilistic survivors.
    """
    return plan_user(profile, config, regular).draw(rng)


def recommend_all(
    profiles: Iterable[UserProfile],
    config: PipelineConfig,
    seed: int,
    regular: Sequence[str] | None = None,
) -> list[tuple[str, Slate]]:
    """Recommend for many users, each with its own stream derived from ``(seed, user_id)``."""
    return [
        (p.user_id, recommend(p, config, regular, user_stream(seed, p.user_id, "recommend")))
        for p in profiles
    ]


# -- config loading ----------------------------------------------------------

def _item_from_dict(item_id: str, raw: Mapping, base: Path, model_cache: dict) -> ItemConfig:
    stats = ItemStats(item_id, int(raw.get("positives", 0)), int(raw.get("total", 0)))
    params = None
    if "alpha" in raw:
        params = ProbFilterParams.from_alpha(float(raw["alpha"]), int(raw.get("ns", 1)))
        p = params.p
    elif "p" in raw:
        p = float(raw["p"])
        if "ns" in raw and p < 1.0:
            params = ProbFilterParams.from_p(p, int(raw["ns"]))
    else:
        raise ConfigError(f"{item_id}: give either alpha/ns or p")
    model = None
    if raw.get("model"):
        model_path = (base / raw["model"]).resolve()
        if model_path not in model_cache:
            if not model_path.exists():
                raise ConfigError(f"{item_id}: model artifact {model_path} not found")
            model_cache[model_path] = load_model(model_path)
        model = model_cache[model_path]
        if "threshold" in raw:
            model = model.with_threshold(float(raw["threshold"]))
        elif math.isnan(model.threshold):
            raise ConfigError(f"{item_id}: model has no threshold and the config sets none")
    return ItemConfig(item_id, p, stats, params, model)


def config_from_dict(raw: Mapping, base_dir: str | Path = ".", rules: RuleSet | None = None) -> PipelineConfig:
    base = Path(base_dir)
    if rules is None:
        if "rules" not in raw:
            raise ConfigError("config needs a 'rules' file")
        rules_path = base / raw["rules"]
        if not rules_path.exists():
            raise ConfigError(f"rules file {rules_path} not found")
        rules = load_rules(rules_path, raw.get("schema"))
    cache: dict = {}
    items = {k: _item_from_dict(k, v, base, cache) for k, v in raw.get("items", {}).items()}
    return PipelineConfig(
        rules=rules,
        items=items,
        imbalance_cutoff=float(raw.get("imbalance_cutoff", DEFAULT_IMBALANCE_CUTOFF)),
        capacity=int(raw.get("capacity", SLATE_CAPACITY)),
        regular=tuple(raw.get("regular", ())),
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = config_from_dict(raw, path.parent)
    object.__setattr__(cfg, "source", str(path))
    return cfg
