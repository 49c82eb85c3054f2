"""Gradient-boosted regression trees on the logistic loss.

Each round fits a depth-limited tree to the negative gradient ``y - p`` of the
current prediction. Leaf values are Newton steps ``sum(y - p) / (sum(p(1-p)) + l2)``
in log-odds space, and the ensemble predicts
``sigmoid(base_score + learning_rate * sum(leaf values))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from switchrec.domain import FeatureValue
from switchrec.gb_filter.encoding import FeatureEncoder, LabeledSample

_EPS = 1e-15


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class BoostingParams:
    n_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 20
    l2: float = 1.0
    subsample: float = 1.0
    seed: int = 0
    max_halvings: int = 8

    def __post_init__(self) -> None:
        if self.n_trees < 0 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees >= 0, max_depth >= 1 and min_samples_leaf >= 1 required")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree. Node ``i`` is a leaf iff ``feature[i] == -1``.

    Internal nodes send a row left when ``x[feature] <= threshold``; NaN goes
    to the left child iff ``default_left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    default_left: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        def d(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(d(int(self.left[i])), d(int(self.right[i])))

        return d(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r = rows[active]
            n = node[active]
            x = X[r, feat[active]]
            go_left = np.where(np.isnan(x), self.default_left[n], x <= self.threshold[n])
            node[active] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scaled(self, factor: float) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, self.default_left, self.value * factor)


class _TreeBuilder:
    def __init__(self, X: np.ndarray, grad: np.ndarray, hess: np.ndarray, params: BoostingParams):
        self.X = X
        self.g = grad
        self.h = hess
        self.p = params
        self.nodes: list[list] = []  # [feature, threshold, left, right, default_left, value]

    def leaf_value(self, idx: np.ndarray) -> float:
        return float(-self.g[idx].sum() / (self.h[idx].sum() + self.p.l2))

    def score(self, G, H):
        return G * G / (H + self.p.l2)

    def best_split(self, idx: np.ndarray):
        g, h = self.g[idx], self.h[idx]
        G, H = g.sum(), h.sum()
        parent = self.score(G, H)
        min_leaf = self.p.min_samples_leaf
        best = (1e-12, None)
        for j in range(self.X.shape[1]):
            x = self.X[idx, j]
            miss = np.isnan(x)
            n_miss = int(miss.sum())
            present = ~miss
            xs = x[present]
            if xs.size < 2:
                continue
            order = np.argsort(xs, kind="stable")
            xs = xs[order]
            gs = g[present][order]
            hs = h[present][order]
            cut = np.nonzero(xs[1:] > xs[:-1])[0]  # split after position cut
            if cut.size == 0:
                continue
            gl = np.cumsum(gs)[cut]
            hl = np.cumsum(hs)[cut]
            nl = cut + 1
            nr = xs.size - nl
            # missing values follow the side holding more present samples
            miss_left = nl >= nr
            gm, hm = g[miss].sum(), h[miss].sum()
            GL = gl + np.where(miss_left, gm, 0.0)
            HL = hl + np.where(miss_left, hm, 0.0)
            NL = nl + np.where(miss_left, n_miss, 0)
            NR = idx.size - NL
            ok = (NL >= min_leaf) & (NR >= min_leaf)
            if not ok.any():
                continue
            gain = self.score(GL, HL) + self.score(G - GL, H - HL) - parent
            gain = np.where(ok, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best[0]:
                thr = 0.5 * (xs[cut[k]] + xs[cut[k] + 1])
                best = (float(gain[k]), (j, thr, bool(miss_left[k])))
        return best[1]

    def build(self, idx: np.ndarray, depth: int) -> int:
        node_id = len(self.nodes)
        self.nodes.append([-1, 0.0, -1, -1, False, self.leaf_value(idx)])
        if depth >= self.p.max_depth or idx.size < 2 * self.p.min_samples_leaf:
            return node_id
        split = self.best_split(idx)
        if split is None:
            return node_id
        j, thr, miss_left = split
        x = self.X[idx, j]
        go_left = np.where(np.isnan(x), miss_left, x <= thr)
        left = self.build(idx[go_left], depth + 1)
        right = self.build(idx[~go_left], depth + 1)
        self.nodes[node_id][:5] = [j, thr, left, right, miss_left]
        return node_id

    def tree(self, idx: np.ndarray) -> Tree:
        self.build(idx, 0)
        cols = list(zip(*self.nodes))
        return Tree(
            feature=np.array(cols[0], dtype=np.int32),
            threshold=np.array(cols[1], dtype=float),
            left=np.array(cols[2], dtype=np.int32),
            right=np.array(cols[3], dtype=np.int32),
            default_left=np.array(cols[4], dtype=bool),
            value=np.array(cols[5], dtype=float),
        )


def sigmoid(z: np.ndarray) -> np.ndarray:
    # clipped so that scores stay strictly inside (0, 1)
    p = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))
    return np.clip(p, _EPS, 1.0 - 1e-12)


def logistic_loss(y: np.ndarray, margin: np.ndarray) -> float:
    """Mean negative log-likelihood, computed stably from log-odds."""
    margin = np.asarray(margin, dtype=float)
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@dataclass(frozen=True, eq=False)
class BoostedEnsemble:
    base_score: float
    learning_rate: float
    trees: tuple[Tree, ...]
    encoder: FeatureEncoder
    max_depth: int
    train_loss: tuple[float, ...] = field(default=(), compare=False)

    def margin(self, X: np.ndarray) -> np.ndarray:
        # sequential accumulation keeps single-row and batch scoring bit-identical
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X)
        return self.base_score + self.learning_rate * total

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.margin(X))

    def staged_margin(self, X: np.ndarray):
        out = np.full(X.shape[0], self.base_score)
        yield out.copy()
        for t in self.trees:
            out = out + self.learning_rate * t.predict(X)
            yield out.copy()


def fit_boosting(X: np.ndarray, y: np.ndarray, encoder: FeatureEncoder, params: BoostingParams) -> BoostedEnsemble:
    y = np.asarray(y, dtype=float)
    n = y.size
    if n == 0:
        raise TrainingError("empty dataset")
    positives = y.sum()
    if positives == 0 or positives == n:
        raise TrainingError(
            "dataset has a single class; items without both outcomes belong on the "
            "probabilistic filter path (positive fraction below the switching cutoff)"
        )
    rate = positives / n
    base = float(np.log(rate / (1.0 - rate)))
    margin = np.full(n, base)
    losses = [logistic_loss(y, margin)]
    rng = np.random.default_rng(params.seed)
    trees: list[Tree] = []
    for _ in range(params.n_trees):
        p = sigmoid(margin)
        grad = p - y
        hess = np.maximum(p * (1.0 - p), _EPS)
        if params.subsample < 1.0:
            idx = np.sort(rng.choice(n, size=max(1, int(round(params.subsample * n))), replace=False))
        else:
            idx = np.arange(n)
        tree = _TreeBuilder(X, grad, hess, params).tree(idx)
        step = tree.predict(X)
        # halve the step until the training loss does not go up
        for _ in range(params.max_halvings):
            candidate = logistic_loss(y, margin + params.learning_rate * step)
            if candidate <= losses[-1]:
                break
            tree = tree.scaled(0.5)
            step = step * 0.5
        else:
            candidate = logistic_loss(y, margin + params.learning_rate * step)
            if candidate > losses[-1]:
                tree = tree.scaled(0.0)
                step = step * 0.0
                candidate = losses[-1]
        margin = margin + params.learning_rate * step
        losses.append(candidate)
        trees.append(tree)
    return BoostedEnsemble(base, params.learning_rate, tuple(trees), encoder, params.max_depth, tuple(losses))


def train_classifier(dataset: Sequence[LabeledSample], params: BoostingParams | None = None) -> BoostedEnsemble:
    """Train a conversion classifier on labeled samples."""
    params = params or BoostingParams()
    if not dataset:
        raise TrainingError("empty dataset")
    encoder = FeatureEncoder.fit(s.features for s in dataset)
    X = encoder.encode([s.features for s in dataset])
    y = np.array([s.label for s in dataset], dtype=float)
    return fit_boosting(X, y, encoder, params)


def predict_score(model: BoostedEnsemble, features: Mapping[str, FeatureValue] | object) -> float:
    """Raw (uncalibrated) conversion probability for one user.

    Accepts a feature mapping or anything with a ``features`` attribute.
    """
    feats = getattr(features, "features", features)
    X = model.encoder.encode_one(feats)[None, :]
    return float(model.predict_proba(X)[0])


def predict_scores(model: BoostedEnsemble, rows: Sequence[Mapping[str, FeatureValue]]) -> np.ndarray:
    return model.predict_proba(model.encoder.encode(list(rows)))
