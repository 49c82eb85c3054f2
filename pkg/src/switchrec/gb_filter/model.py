"""Per-item calibrated classifier, the filter itself, and the artifact format.

Artifact layout (version 1, every number little-endian)::

    magic            8 bytes   b"SWRGBM\\x00\\x01"
    version          u16
    item_id          str
    threshold        f64       NaN when unset
    base_score       f64
    learning_rate    f64
    max_depth        u32
    n_numeric        u32, then n_numeric x str
    n_categorical    u32, then per feature: str name, u32 n_levels, n_levels x str
    n_trees          u32, then per tree:
        n_nodes      u32
        feature      n_nodes x i32   (-1 marks a leaf)
        threshold    n_nodes x f64
        left         n_nodes x i32
        right        n_nodes x i32
        default_left n_nodes x u8
        value        n_nodes x f64
    n_knots          u32
    knot_scores      n_knots x f64
    knot_probs       n_knots x f64

``str`` is a u32 byte length followed by UTF-8 bytes.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from switchrec.domain import UserProfile
from switchrec.gb_filter.boosting import BoostedEnsemble, BoostingParams, Tree, fit_boosting, predict_score
from switchrec.gb_filter.encoding import FeatureEncoder, LabeledSample
from switchrec.gb_filter.isotonic import IsotonicMap, calibrate, fit_isotonic

MAGIC = b"SWRGBM\x00\x01"
FORMAT_VERSION = 1


class MissingModelError(KeyError):
    def __str__(self) -> str:
        return f"no gradient-boosting model for item {self.args[0]!r}; route it to the probabilistic filter"


@dataclass(frozen=True, eq=False)
class GBModel:
    item_id: str
    ensemble: BoostedEnsemble
    isotonic: IsotonicMap
    threshold: float = math.nan

    def raw_score(self, profile: UserProfile | Mapping) -> float:
        return predict_score(self.ensemble, profile)

    def calibrated_score(self, profile: UserProfile | Mapping) -> float:
        return calibrate(self.isotonic, self.raw_score(profile))

    def calibrated_scores(self, rows: Sequence[Mapping]) -> np.ndarray:
        raw = self.ensemble.predict_proba(self.ensemble.encoder.encode(list(rows)))
        return np.asarray(calibrate(self.isotonic, raw), dtype=float)

    def with_threshold(self, threshold: float) -> "GBModel":
        return replace(self, threshold=float(threshold))


def split_holdout(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random train/holdout index split; the holdout gets ``round(fraction * n)`` rows."""
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(fraction * n))
    return np.sort(perm[k:]), np.sort(perm[:k])


def train_item_model(
    item_id: str,
    dataset: Sequence[LabeledSample],
    params: BoostingParams | None = None,
    calibration_fraction: float = 0.2,
) -> tuple[GBModel, np.ndarray]:
    """Train the classifier on one split and fit isotonic calibration on the held-out rest.

    Returns the model and the holdout indices, so callers can report metrics
    on data the classifier never saw.
    """
    params = params or BoostingParams()
    encoder = FeatureEncoder.fit(s.features for s in dataset)
    X = encoder.encode([s.features for s in dataset])
    y = np.array([s.label for s in dataset], dtype=float)
    train_idx, hold_idx = split_holdout(len(dataset), calibration_fraction, params.seed)
    ensemble = fit_boosting(X[train_idx], y[train_idx], encoder, params)
    raw = ensemble.predict_proba(X[hold_idx])
    iso = fit_isotonic(list(zip(raw, y[hold_idx])))
    return GBModel(item_id, ensemble, iso), hold_idx


def gb_filter(
    candidates: Sequence[str],
    profile: UserProfile,
    models: Mapping[str, GBModel],
) -> list[str]:
    """Keep candidates whose calibrated score is strictly above their threshold."""
    kept = []
    for item_id in candidates:
        if item_id not in models:
            raise MissingModelError(item_id)
        model = models[item_id]
        if model.calibrated_score(profile) > model.threshold:
            kept.append(item_id)
    return kept


# -- serialization -----------------------------------------------------------

def _w_str(out: BinaryIO, s: str) -> None:
    data = s.encode("utf-8")
    out.write(struct.pack("<I", len(data)))
    out.write(data)


def _r_exact(inp: BinaryIO, n: int) -> bytes:
    data = inp.read(n)
    if len(data) != n:
        raise ValueError("truncated model artifact")
    return data


def _r_str(inp: BinaryIO) -> str:
    (n,) = struct.unpack("<I", _r_exact(inp, 4))
    return _r_exact(inp, n).decode("utf-8")


def _r_u32(inp: BinaryIO) -> int:
    return struct.unpack("<I", _r_exact(inp, 4))[0]


def _r_array(inp: BinaryIO, dtype: str, n: int) -> np.ndarray:
    dt = np.dtype(dtype)
    return np.frombuffer(_r_exact(inp, dt.itemsize * n), dtype=dt).copy()


def dumps(model: GBModel) -> bytes:
    out = io.BytesIO()
    ens = model.ensemble
    out.write(MAGIC)
    out.write(struct.pack("<H", FORMAT_VERSION))
    _w_str(out, model.item_id)
    out.write(struct.pack("<dddI", model.threshold, ens.base_score, ens.learning_rate, ens.max_depth))
    out.write(struct.pack("<I", len(ens.encoder.numeric)))
    for name in ens.encoder.numeric:
        _w_str(out, name)
    out.write(struct.pack("<I", len(ens.encoder.categorical)))
    for name, levels in ens.encoder.categorical:
        _w_str(out, name)
        out.write(struct.pack("<I", len(levels)))
        for level in levels:
            _w_str(out, level)
    out.write(struct.pack("<I", len(ens.trees)))
    for t in ens.trees:
        out.write(struct.pack("<I", t.n_nodes))
        out.write(t.feature.astype("<i4").tobytes())
        out.write(t.threshold.astype("<f8").tobytes())
        out.write(t.left.astype("<i4").tobytes())
        out.write(t.right.astype("<i4").tobytes())
        out.write(t.default_left.astype("u1").tobytes())
        out.write(t.value.astype("<f8").tobytes())
    knots = len(model.isotonic.scores)
    out.write(struct.pack("<I", knots))
    out.write(np.asarray(model.isotonic.scores, dtype="<f8").tobytes())
    out.write(np.asarray(model.isotonic.probs, dtype="<f8").tobytes())
    return out.getvalue()


def loads(data: bytes) -> GBModel:
    inp = io.BytesIO(data)
    if _r_exact(inp, len(MAGIC)) != MAGIC:
        raise ValueError("not a switchrec model artifact")
    (version,) = struct.unpack("<H", _r_exact(inp, 2))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported artifact version {version}")
    item_id = _r_str(inp)
    threshold, base, lr, max_depth = struct.unpack("<dddI", _r_exact(inp, 28))
    numeric = tuple(_r_str(inp) for _ in range(_r_u32(inp)))
    categorical = []
    for _ in range(_r_u32(inp)):
        name = _r_str(inp)
        categorical.append((name, tuple(_r_str(inp) for _ in range(_r_u32(inp)))))
    encoder = FeatureEncoder(numeric, tuple(categorical))
    trees = []
    for _ in range(_r_u32(inp)):
        n = _r_u32(inp)
        trees.append(
            Tree(
                feature=_r_array(inp, "<i4", n).astype(np.int32),
                threshold=_r_array(inp, "<f8", n).astype(float),
                left=_r_array(inp, "<i4", n).astype(np.int32),
                right=_r_array(inp, "<i4", n).astype(np.int32),
                default_left=_r_array(inp, "u1", n).astype(bool),
                value=_r_array(inp, "<f8", n).astype(float),
            )
        )
    k = _r_u32(inp)
    scores = _r_array(inp, "<f8", k)
    probs = _r_array(inp, "<f8", k)
    if inp.read(1):
        raise ValueError("trailing bytes in model artifact")
    ensemble = BoostedEnsemble(base, lr, tuple(trees), encoder, max_depth)
    iso = IsotonicMap(tuple(float(v) for v in scores), tuple(float(v) for v in probs))
    return GBModel(item_id, ensemble, iso, threshold)


def save_model(model: GBModel, path: str | Path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path: str | Path) -> GBModel:
    return loads(Path(path).read_bytes())
