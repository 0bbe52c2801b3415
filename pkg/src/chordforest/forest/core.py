"""From-scratch random-forest regression.

Bagging over CART variance-reduction trees with per-split feature
subsampling.  Determinism contract: for a fixed ``(data, config, seed)``
the fitted forest is byte-identical in canonical serialization, for any
worker count and for either split-kernel backend.  Per-tree random streams
are derived from ``(seed, tree_index)`` so trees can be fitted in any
order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import DataError, ModelError
from ..rng import STAGE_PERMUTATION, STAGE_TREE, stream
from ..schema import Dataset
from . import backend

FOREST_FORMAT = "chordforest-forest/1"


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters.

    ``mtry=None`` resolves to max(1, floor(p / 3)) at fit time; values
    above the predictor count are clamped to it.  ``min_node_size`` bounds
    the in-bag size of every child a split may create.
    """

    n_trees: int = 500
    mtry: Optional[int] = None
    min_node_size: int = 5
    max_depth: Optional[int] = None
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ModelError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_node_size < 1:
            raise ModelError(f"min_node_size must be >= 1, got {self.min_node_size}")
        if self.mtry is not None and self.mtry < 1:
            raise ModelError(f"mtry must be >= 1, got {self.mtry}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError(f"max_depth must be >= 0, got {self.max_depth}")

    def resolve_mtry(self, n_predictors: int) -> int:
        if self.mtry is None:
            return max(1, n_predictors // 3)
        return min(self.mtry, n_predictors)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_node_size": self.min_node_size,
            "max_depth": self.max_depth,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: Mapping) -> "ForestConfig":
        return ForestConfig(
            n_trees=int(d["n_trees"]),
            mtry=None if d.get("mtry") is None else int(d["mtry"]),
            min_node_size=int(d["min_node_size"]),
            max_depth=None if d.get("max_depth") is None else int(d["max_depth"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array CART tree.

    ``feature[i] == -1`` marks a leaf.  ``value`` holds the in-bag mean of
    every node (for leaves, the prediction).  ``gain`` is the SSE decrease
    of the node's split (0 for leaves).  ``bootstrap`` lists the in-bag row
    indices of the training matrix (length n, with repeats).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray
    bootstrap: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Route rows to leaves; ties at a threshold go left (x <= t)."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feats = self.feature[node]
            internal = feats >= 0
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            cur = node[rows]
            go_left = X[rows, feats[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "gain": self.gain.tolist(),
            "bootstrap": self.bootstrap.tolist(),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "RegressionTree":
        return RegressionTree(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
            gain=np.asarray(d["gain"], dtype=np.float64),
            bootstrap=np.asarray(d["bootstrap"], dtype=np.int64),
        )


@dataclass(frozen=True)
class Forest:
    trees: tuple[RegressionTree, ...]
    config: ForestConfig
    predictors: tuple[str, ...]
    target: str

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.predictors):
            raise ModelError(f"expected {len(self.predictors)} predictor columns, got {X.shape[1]}")
        if np.isnan(X).any():
            raise DataError("missing predictor value in prediction input")
        return X

    def predict_trees(self, X) -> np.ndarray:
        """Per-tree predictions, shape (n_trees, n_rows)."""
        X = self._matrix(X)
        return np.stack([t.predict(X) for t in self.trees])

    def predict_matrix(self, X) -> np.ndarray:
        return self.predict_trees(X).mean(axis=0)

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        return self.predict_matrix(ds.matrix(self.predictors, require_complete=True))

    def predict_row(self, row) -> float:
        """Predict one respondent given a mapping code -> value or a vector."""
        if isinstance(row, Mapping):
            try:
                vec = [row[c] for c in self.predictors]
            except KeyError as exc:
                raise DataError(f"missing predictor value for {exc.args[0]!r}") from None
        else:
            vec = list(row)
        return float(self.predict_matrix(np.asarray(vec, dtype=np.float64))[0])

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "target": self.target,
            "predictors": list(self.predictors),
            "config": self.config.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @staticmethod
    def from_dict(d: Mapping) -> "Forest":
        if d.get("format") != FOREST_FORMAT:
            raise ModelError(f"unsupported forest format: {d.get('format')!r}")
        return Forest(
            trees=tuple(RegressionTree.from_dict(t) for t in d["trees"]),
            config=ForestConfig.from_dict(d["config"]),
            predictors=tuple(d["predictors"]),
            target=str(d["target"]),
        )

    @staticmethod
    def load(path) -> "Forest":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelError(f"cannot load forest from {path}: {exc}") from exc
        return Forest.from_dict(d)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# fitting


def best_split(X, y, features=None, min_leaf: int = 1):
    """Best single split over the given candidate features.

    Standalone form of the node search: returns
    ``(feature_index, threshold, sse_decrease)`` or None when no split
    reduces the SSE.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if len(X) != len(y):
        raise DataError("X and y row counts differ")
    if len(y) < 2:
        raise DataError("need at least 2 rows to search for a split")
    if features is None:
        features = np.arange(X.shape[1], dtype=np.int64)
    else:
        features = np.asarray(sorted(int(f) for f in features), dtype=np.int64)
    samples = np.arange(len(y), dtype=np.int64)
    feat, thr, gain = backend.best_split(X, y, samples, 0, len(y), features, int(min_leaf))
    if feat < 0:
        return None
    return int(feat), float(thr), float(gain)


def _grow_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, mtry: int,
               tree_index: int, kernel) -> RegressionTree:
    rng = stream(cfg.seed, STAGE_TREE, tree_index)
    n, p = X.shape
    boot = rng.integers(0, n, size=n)
    Xb = np.ascontiguousarray(X[boot])
    yb = np.ascontiguousarray(y[boot])
    samples = np.arange(n, dtype=np.int64)
    min_leaf = cfg.min_node_size
    unsplittable = max(2, 2 * min_leaf)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    n_samples: list[int] = []
    gain: list[float] = []

    stack = [(0, n, 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        idx = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = idx
            else:
                right[parent] = idx
        seg = samples[start:end]
        ysub = yb[seg]
        m = end - start
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(ysub.sum() / m))
        n_samples.append(m)
        gain.append(0.0)

        if m < unsplittable:
            continue
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        if ysub.min() == ysub.max():
            continue

        feats = rng.choice(p, size=mtry, replace=False)
        feats = np.sort(feats).astype(np.int64)
        f, thr, g = kernel.best_split(Xb, yb, samples, start, end, feats, min_leaf)
        if f < 0:
            continue
        n_left = kernel.partition(Xb, samples, start, end, int(f), float(thr))
        feature[idx] = int(f)
        threshold[idx] = float(thr)
        gain[idx] = float(g)
        # push right first so the left child is built (and numbered) first
        stack.append((start + n_left, end, depth + 1, idx, False))
        stack.append((start, start + n_left, depth + 1, idx, True))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        gain=np.asarray(gain, dtype=np.float64),
        bootstrap=boot.astype(np.int64),
    )


def fit_forest(train: Dataset, target: str, predictors: Sequence[str],
               cfg: ForestConfig, workers: int = 1, kernel=None) -> Forest:
    """Fit a bagged forest on complete-case training data.

    Raises :class:`DataError` when target/predictor columns contain missing
    values.  ``workers`` only parallelizes tree fitting; results are
    identical for any worker count.
    """
    cfg.validate()
    predictors = tuple(predictors)
    if not predictors:
        raise ModelError("empty predictor list")
    if kernel is None:
        kernel = backend
    X = np.ascontiguousarray(train.matrix(predictors, require_complete=True))
    y = np.ascontiguousarray(train.matrix([target], require_complete=True)[:, 0])
    if len(y) < 1:
        raise DataError("training data has no rows")
    mtry = cfg.resolve_mtry(len(predictors))

    def build(i: int) -> RegressionTree:
        return _grow_tree(X, y, cfg, mtry, i, kernel)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = tuple(pool.map(build, range(cfg.n_trees)))
    else:
        trees = tuple(build(i) for i in range(cfg.n_trees))
    return Forest(trees=trees, config=cfg, predictors=predictors, target=target)


# ---------------------------------------------------------------------------
# importances


def impurity_importance(forest: Forest) -> dict[str, float]:
    """Total SSE decrease per feature over all splits, averaged over trees.

    Features never used by any split score exactly 0.
    """
    totals = np.zeros(len(forest.predictors))
    for tree in forest.trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    totals /= forest.n_trees
    return {code: float(v) for code, v in zip(forest.predictors, totals)}


def permutation_importance(forest: Forest, data: Dataset, seed: int,
                           n_repeats: int = 5) -> dict[str, float]:
    """Mean RMSE increase after shuffling each predictor column."""
    if n_repeats < 1:
        raise ModelError(f"n_repeats must be >= 1, got {n_repeats}")
    X = data.matrix(forest.predictors, require_complete=True)
    y = data.matrix([forest.target], require_complete=True)[:, 0]
    n = len(y)
    base = float(np.sqrt(np.mean((y - forest.predict_matrix(X)) ** 2)))
    out: dict[str, float] = {}
    for j, code in enumerate(forest.predictors):
        deltas = []
        for r in range(n_repeats):
            perm = stream(seed, STAGE_PERMUTATION, j, r).permutation(n)
            Xp = X.copy()
            Xp[:, j] = X[perm, j]
            rmse_p = float(np.sqrt(np.mean((y - forest.predict_matrix(Xp)) ** 2)))
            deltas.append(rmse_p - base)
        out[code] = float(np.mean(deltas))
    return out


def oob_predictions(forest: Forest, train: Dataset) -> np.ndarray:
    """Out-of-bag predictions on the training rows (NaN if always in-bag).

    Computed for diagnostics only; model selection goes through CV.
    """
    X = train.matrix(forest.predictors, require_complete=True)
    n = len(X)
    sums = np.zeros(n)
    counts = np.zeros(n)
    for tree in forest.trees:
        in_bag = np.zeros(n, dtype=bool)
        in_bag[tree.bootstrap] = True
        oob = ~in_bag
        if not oob.any():
            continue
        sums[oob] += tree.predict(X[oob])
        counts[oob] += 1
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / counts, np.nan)


def replay_leaf_means(tree: RegressionTree, X: np.ndarray, y: np.ndarray) -> dict[int, float]:
    """Recompute leaf means by routing the tree's bootstrap sample through it.

    Returns {leaf_node_index: replayed_mean}; invariant tests compare these
    against the recorded node values.
    """
    Xb = X[tree.bootstrap]
    yb = y[tree.bootstrap]
    node = np.zeros(len(Xb), dtype=np.int64)
    while True:
        feats = tree.feature[node]
        internal = feats >= 0
        if not internal.any():
            break
        rows = np.flatnonzero(internal)
        cur = node[rows]
        go_left = Xb[rows, feats[rows]] <= tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
    return {int(leaf): float(yb[node == leaf].mean()) for leaf in np.unique(node)}
