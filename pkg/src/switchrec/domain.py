"""Users, catalog items and the slate shown in the suggestions component."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

SLATE_CAPACITY = 15
VISIBLE_COUNT = 4

FeatureValue = float | str


class ValidationError(ValueError):
    """Raised when inputs violate a data-model invariant."""


class ItemKind(str, enum.Enum):
    PROMOTED = "promoted"
    REGULAR = "regular"


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    features: Mapping[str, FeatureValue] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValidationError("user_id must be nonempty")
        for name, value in self.features.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ValidationError(f"feature {name!r} of user {self.user_id!r} is not finite")
        object.__setattr__(self, "features", MappingProxyType(dict(self.features)))

    def get(self, name: str) -> FeatureValue | None:
        return self.features.get(name)


@dataclass(frozen=True)
class Item:
    item_id: str
    kind: ItemKind
    label: str = ""


@dataclass(frozen=True)
class Slate:
    """Ordered recommendation list; promoted entries always come first."""

    entries: tuple[str, ...]
    kinds: tuple[ItemKind, ...]
    visible_count: int = VISIBLE_COUNT

    def __post_init__(self) -> None:
        if len(self.entries) != len(self.kinds):
            raise ValidationError("entries and kinds differ in length")
        if len(self.entries) > SLATE_CAPACITY:
            raise ValidationError(f"slate holds at most {SLATE_CAPACITY} items")
        if len(set(self.entries)) != len(self.entries):
            raise ValidationError("slate contains duplicate item ids")
        seen_regular = False
        for kind in self.kinds:
            if kind is ItemKind.REGULAR:
                seen_regular = True
            elif seen_regular:
                raise ValidationError("promoted item placed after a regular item")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def promoted(self) -> tuple[str, ...]:
        return tuple(i for i, k in zip(self.entries, self.kinds) if k is ItemKind.PROMOTED)

    @property
    def regular(self) -> tuple[str, ...]:
        return tuple(i for i, k in zip(self.entries, self.kinds) if k is ItemKind.REGULAR)


def assemble_slate(
    promoted: Sequence[str],
    regular: Sequence[str],
    capacity: int = SLATE_CAPACITY,
) -> Slate:
    """Concatenate promoted then regular items and cut the result at ``capacity``.

    If there are more promoted items than slots, the promoted list itself is
    truncated.
    """
    if capacity < 1:
        raise ValidationError("capacity must be a positive integer")
    if capacity > SLATE_CAPACITY:
        raise ValidationError(f"capacity cannot exceed {SLATE_CAPACITY}")
    combined = list(promoted) + list(regular)
    if len(set(combined)) != len(combined):
        dupes = sorted({i for i in combined if combined.count(i) > 1})
        raise ValidationError(f"duplicate item ids across inputs: {dupes}")
    kinds = [ItemKind.PROMOTED] * len(promoted) + [ItemKind.REGULAR] * len(regular)
    return Slate(tuple(combined[:capacity]), tuple(kinds[:capacity]))


def visible_prefix(slate: Slate) -> list[str]:
    return list(slate.entries[: slate.visible_count])


def order_promoted(
    item_ids: Iterable[str],
    scores: Mapping[str, float] | None = None,
) -> list[str]:
    """Order surviving promoted items for display.

    Items with a calibrated score come first, by descending score with ties
    broken by item id. Unscored items follow in their input order.
    """
    scores = scores or {}
    ids = list(item_ids)
    scored = sorted((i for i in ids if i in scores), key=lambda i: (-scores[i], i))
    unscored = [i for i in ids if i not in scores]
    return scored + unscored


def load_catalog(path: str | Path) -> dict[str, Item]:
    """Read a catalog CSV with columns ``item_id,kind,label``."""
    catalog: dict[str, Item] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"item_id", "kind", "label"} - set(reader.fieldnames or [])
        if missing:
            raise ValidationError(f"{path}: catalog is missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            item_id = row["item_id"].strip()
            if not item_id:
                raise ValidationError(f"{path}:{lineno}: empty item_id")
            if item_id in catalog:
                raise ValidationError(f"{path}:{lineno}: duplicate item_id {item_id!r}")
            try:
                kind = ItemKind(row["kind"].strip().lower())
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: unknown kind {row['kind']!r}") from None
            catalog[item_id] = Item(item_id, kind, row["label"])
    return catalog
