from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from switchrec.domain import FeatureValue


@dataclass(frozen=True)
class LabeledSample:
    features: Mapping[str, FeatureValue]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value.strip() == ""
    return isinstance(value, float) and math.isnan(value)


@dataclass(frozen=True)
class FeatureEncoder:
    """Maps feature dicts to a dense float matrix.

    Numeric features keep one column each (missing becomes NaN). Categorical
    features are one-hot expanded over the levels seen at fit time; a missing
    categorical value sets all of its columns to NaN and an unseen level sets
    them all to zero.
    """

    numeric: tuple[str, ...] = ()
    categorical: tuple[tuple[str, tuple[str, ...]], ...] = ()
    columns: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        cols = list(self.numeric)
        for name, levels in self.categorical:
            cols += [f"{name}={level}" for level in levels]
        object.__setattr__(self, "columns", tuple(cols))

    @classmethod
    def fit(cls, rows: Iterable[Mapping[str, FeatureValue]]) -> "FeatureEncoder":
        rows = list(rows)
        names: list[str] = []
        for row in rows:
            for name in row:
                if name not in names:
                    names.append(name)
        numeric, categorical = [], []
        for name in names:
            values = [row.get(name) for row in rows]
            present = [v for v in values if not _is_missing(v)]
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in present):
                numeric.append(name)
            else:
                categorical.append((name, tuple(sorted({str(v) for v in present}))))
        return cls(tuple(numeric), tuple(categorical))

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def encode_one(self, features: Mapping[str, FeatureValue]) -> np.ndarray:
        row = np.zeros(self.n_columns)
        j = 0
        for name in self.numeric:
            value = features.get(name)
            if _is_missing(value):
                row[j] = np.nan
            else:
                try:
                    row[j] = float(value)
                except (TypeError, ValueError):
                    row[j] = np.nan
            j += 1
        for name, levels in self.categorical:
            value = features.get(name)
            if _is_missing(value):
                row[j : j + len(levels)] = np.nan
            else:
                s = str(value)
                for k, level in enumerate(levels):
                    if s == level:
                        row[j + k] = 1.0
            j += len(levels)
        return row

    def encode(self, rows: Sequence[Mapping[str, FeatureValue]]) -> np.ndarray:
        if not rows:
            return np.zeros((0, self.n_columns))
        return np.vstack([self.encode_one(r) for r in rows])


def coerce_value(raw: str) -> FeatureValue | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        return raw
    return value if math.isfinite(value) else None


def infer_numeric_columns(rows: Sequence[Mapping[str, str]], columns: Sequence[str]) -> set[str]:
    """Columns whose every non-empty cell parses as a finite float."""
    numeric = set()
    for col in columns:
        ok = True
        for row in rows:
            cell = (row.get(col) or "").strip()
            if cell == "":
                continue
            try:
                if not math.isfinite(float(cell)):
                    ok = False
            except ValueError:
                ok = False
            if not ok:
                break
        if ok:
            numeric.add(col)
    return numeric


def typed_rows(rows: Sequence[Mapping[str, str]], columns: Sequence[str]) -> list[dict[str, FeatureValue]]:
    numeric = infer_numeric_columns(rows, columns)
    out = []
    for row in rows:
        feats: dict[str, FeatureValue] = {}
        for col in columns:
            cell = (row.get(col) or "").strip()
            if cell == "":
                continue
            feats[col] = float(cell) if col in numeric else cell
        out.append(feats)
    return out


def read_dataset(path: str | Path, label_column: str = "label") -> list[LabeledSample]:
    """Load a CSV with a header row and a 0/1 ``label`` column.

    A ``user_id`` column, when present, is ignored. Every other column is a
    feature; a column is numeric when all its non-empty cells parse as floats.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or label_column not in reader.fieldnames:
            raise ValueError(f"{path}: no {label_column!r} column")
        raw_rows = list(reader)
        columns = [c for c in reader.fieldnames if c not in (label_column, "user_id")]
    labels = []
    for lineno, row in enumerate(raw_rows, start=2):
        cell = (row[label_column] or "").strip()
        if cell not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: label must be 0 or 1, got {cell!r}")
        labels.append(int(cell))
    return [LabeledSample(f, y) for f, y in zip(typed_rows(raw_rows, columns), labels)]
