"""The compiled kernel must be bit-identical to the numpy fallback: same
split choices, same threshold/gain bits, same partitions, and therefore
byte-identical forests."""

import numpy as np
import pytest

from chordforest.forest import ForestConfig, fit_forest
from chordforest.forest import _split_py

from conftest import make_dataset

_split_cy = pytest.importorskip(
    "chordforest.forest._split_cy", reason="compiled kernel not built"
)


def _random_case(rng):
    n = int(rng.integers(2, 60))
    p = int(rng.integers(1, 6))
    if rng.random() < 0.5:
        # grid-valued data with heavy ties, like real responses
        X = rng.choice(np.arange(-100, 101, 25), size=(n, p)).astype(float)
        y = rng.choice(np.arange(-100, 101, 25), size=n).astype(float)
    else:
        X = rng.normal(size=(n, p)) * 50
        y = rng.normal(size=n) * 40
    return np.ascontiguousarray(X), np.ascontiguousarray(y)


def test_best_split_bitwise_equal():
    rng = np.random.default_rng(7)
    for _ in range(1500):
        X, y = _random_case(rng)
        n, p = X.shape
        k = int(rng.integers(1, p + 1))
        feats = np.sort(rng.choice(p, size=k, replace=False)).astype(np.int64)
        min_leaf = int(rng.integers(1, 4))
        samples = np.arange(n, dtype=np.int64)
        a = _split_py.best_split(X, y, samples.copy(), 0, n, feats, min_leaf)
        b = _split_cy.best_split(X, y, samples.copy(), 0, n, feats, min_leaf)
        assert a == b  # exact, including float bits


def test_best_split_on_subranges():
    rng = np.random.default_rng(13)
    for _ in range(300):
        X, y = _random_case(rng)
        n, p = X.shape
        samples = rng.integers(0, n, size=n).astype(np.int64)  # bootstrap-like
        start = int(rng.integers(0, n - 1))
        end = int(rng.integers(start + 2, n + 1)) if start + 2 <= n else n
        feats = np.arange(p, dtype=np.int64)
        a = _split_py.best_split(X, y, samples.copy(), start, end, feats, 1)
        b = _split_cy.best_split(X, y, samples.copy(), start, end, feats, 1)
        assert a == b


def test_partition_bitwise_equal():
    rng = np.random.default_rng(21)
    for _ in range(400):
        X, y = _random_case(rng)
        n, p = X.shape
        s1 = rng.permutation(n).astype(np.int64)
        s2 = s1.copy()
        f = int(rng.integers(0, p))
        thr = float(np.median(X[:, f]))
        a = _split_py.partition(X, s1, 0, n, f, thr)
        b = _split_cy.partition(X, s2, 0, n, f, thr)
        assert a == b
        assert np.array_equal(s1, s2)


def test_whole_forest_byte_identical_across_backends():
    rng = np.random.default_rng(3)
    X = rng.choice(np.arange(-100, 101, 25), size=(120, 6)).astype(float)
    y = X[:, 0] * 0.4 + X[:, 1] * 0.2 + rng.normal(size=120) * 10
    cols = [f"x{i}" for i in range(6)]
    ds = make_dataset(cols + ["y"], np.column_stack([X, y]))
    cfg = ForestConfig(n_trees=40, mtry=3, seed=99)
    f_py = fit_forest(ds, "y", cols, cfg, kernel=_split_py)
    f_cy = fit_forest(ds, "y", cols, cfg, kernel=_split_cy)
    assert f_py.to_json() == f_cy.to_json()
