import numpy as np
import pytest

from chordforest.errors import DataError
from chordforest.explain import (
    default_grid,
    export_tree,
    export_tree_dot,
    partial_dependence,
)
from chordforest.forest import Forest, ForestConfig, RegressionTree, fit_forest

from conftest import make_dataset


def _fit(X, y, **kw):
    X = np.asarray(X, dtype=float)
    cols = [f"x{i}" for i in range(X.shape[1])]
    ds = make_dataset(cols + ["y"], np.column_stack([X, y]))
    return fit_forest(ds, "y", cols, ForestConfig(**kw)), ds, cols


class TestPartialDependence:
    def test_constant_model_flat_curve(self):
        forest, ds, _ = _fit(np.arange(20, dtype=float).reshape(-1, 1),
                             np.full(20, 4.0), n_trees=8, seed=0)
        curve = partial_dependence(forest, ds, "x0", grid=[-50, 0, 50])
        assert curve.values == (4.0, 4.0, 4.0)

    def test_single_split_step_hand_oracle(self):
        # 4-row table, two features; the tree can only split x0 at 0 with
        # leaf means 0 (left) and 10 (right).  Marginalizing over the rows
        # leaves a pure step: every row routes with the forced value alone.
        X = np.array([[-2.0, 5.0], [-1.0, -3.0], [1.0, 2.0], [2.0, -8.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        # seed 5's bootstrap is a full permutation, so the lone split is
        # x0 <= 0 with leaf means 0 and 10
        forest, ds, _ = _fit(X, y, n_trees=1, mtry=2, min_node_size=2,
                             max_depth=1, seed=5)
        tree = forest.trees[0]
        assert list(tree.feature[tree.feature >= 0]) == [0]
        assert tree.threshold[0] == 0.0
        curve = partial_dependence(forest, ds, "x0", grid=[-5.0, -0.1, 0.1, 5.0])
        left = float(tree.value[tree.left[0]])
        right = float(tree.value[tree.right[0]])
        assert curve.values == (left, left, right, right)

    def test_forest_pd_is_mean_of_tree_pd(self):
        rng = np.random.default_rng(2)
        X = rng.choice(np.arange(-100, 101, 25), size=(60, 3)).astype(float)
        y = X[:, 0] * 0.5 + X[:, 1] * 0.2 + rng.normal(size=60) * 5
        forest, ds, cols = _fit(X, y, n_trees=12, seed=2)
        grid = [-75.0, 0.0, 75.0]
        curve = partial_dependence(forest, ds, "x0", grid=grid)
        per_tree = []
        for tree in forest.trees:
            single = Forest(trees=(tree,), config=forest.config,
                            predictors=forest.predictors, target="y")
            per_tree.append(partial_dependence(single, ds, "x0", grid=grid).values)
        mean_curve = np.mean(per_tree, axis=0)
        assert np.allclose(curve.values, mean_curve, atol=1e-9)

    def test_identical_trees_equal_single_tree(self):
        forest, ds, _ = _fit(np.arange(12, dtype=float).reshape(-1, 1),
                             np.full(12, -3.0), n_trees=5, seed=3)
        grid = [0.0, 5.0]
        multi = partial_dependence(forest, ds, "x0", grid=grid)
        single = partial_dependence(
            Forest(trees=forest.trees[:1], config=forest.config,
                   predictors=forest.predictors, target="y"),
            ds, "x0", grid=grid)
        assert multi.values == single.values

    def test_constant_in_unsplit_feature(self):
        rng = np.random.default_rng(4)
        X = np.column_stack([rng.normal(size=40) * 20, np.zeros(40)])
        y = X[:, 0]
        forest, ds, _ = _fit(X, y, n_trees=10, mtry=2, seed=4)
        curve = partial_dependence(forest, ds, "x1", grid=[-10.0, 0.0, 10.0])
        assert len(set(curve.values)) == 1

    def test_forced_to_existing_value_matches_plain_mean(self):
        rng = np.random.default_rng(5)
        X = np.full((15, 2), 25.0)
        X[:, 1] = rng.normal(size=15)
        y = rng.normal(size=15) * 10
        forest, ds, _ = _fit(X, y, n_trees=6, seed=5)
        curve = partial_dependence(forest, ds, "x0", grid=[25.0])
        plain = float(np.mean(forest.predict_dataset(ds)))
        assert curve.values[0] == pytest.approx(plain, abs=1e-12)

    def test_unknown_feature_and_empty_grid(self):
        forest, ds, _ = _fit(np.arange(10, dtype=float).reshape(-1, 1),
                             np.arange(10, dtype=float), n_trees=2, seed=0)
        with pytest.raises(DataError):
            partial_dependence(forest, ds, "zz")
        with pytest.raises(DataError):
            partial_dependence(forest, ds, "x0", grid=[])

    def test_default_grid_caps_and_sorts(self):
        grid = default_grid(np.array([3.0, 1.0, 3.0]))
        assert grid == tuple(sorted(set(grid)))
        assert {1.0, 3.0, -100.0, 0.0, 100.0} <= set(grid)
        big = default_grid(np.arange(500, dtype=float))
        assert len(big) <= 101

    def test_csv_export(self, tmp_path):
        forest, ds, _ = _fit(np.arange(10, dtype=float).reshape(-1, 1),
                             np.arange(10, dtype=float), n_trees=2, seed=0)
        curve = partial_dependence(forest, ds, "x0", grid=[0.0, 5.0])
        text = curve.to_csv(tmp_path / "pd.csv")
        assert text.splitlines()[0] == "x,partial_dependence"
        assert len(text.splitlines()) == 3


def _example_tree():
    # shaped like the published sample path:
    # A3 <= -12.5 -> PR7 <= -87.5 -> T5 <= -25 -> predict -75
    return RegressionTree(
        feature=np.array([0, 1, -1, 2, -1, -1, -1]),
        threshold=np.array([-12.5, -87.5, 0.0, -25.0, 0.0, 0.0, 0.0]),
        left=np.array([1, 3, -1, 5, -1, -1, -1]),
        right=np.array([2, 4, -1, 6, -1, -1, -1]),
        value=np.array([0.0, -40.0, 30.0, -60.0, -20.0, -75.0, -30.0]),
        n_samples=np.array([186, 40, 146, 12, 28, 5, 7]),
        gain=np.array([50.0, 20.0, 0.0, 10.0, 0.0, 0.0, 0.0]),
        bootstrap=np.zeros(186, dtype=np.int64),
    )


class TestExportTree:
    def test_single_leaf(self):
        tree = RegressionTree(
            feature=np.array([-1]), threshold=np.array([0.0]),
            left=np.array([-1]), right=np.array([-1]),
            value=np.array([7.5]), n_samples=np.array([42]),
            gain=np.array([0.0]), bootstrap=np.zeros(42, dtype=np.int64))
        assert export_tree(tree, ["x0"]) == "predict = 7.5 (n=42)\n"

    def test_published_path_shape(self):
        text = export_tree(_example_tree(), ["A3", "PR7", "T5"])
        lines = text.splitlines()
        assert lines[0] == "A3 <= -12.5 (n=186)"
        assert lines[1] == "  then: PR7 <= -87.5 (n=40)"
        assert lines[2] == "    then: T5 <= -25 (n=12)"
        assert lines[3] == "      then: predict = -75 (n=5)"

    def test_deterministic_bytes(self):
        tree = _example_tree()
        a = export_tree(tree, ["A3", "PR7", "T5"])
        b = export_tree(tree, ["A3", "PR7", "T5"])
        assert a.encode() == b.encode()

    def test_dot_export_lists_all_nodes_and_edges(self):
        tree = _example_tree()
        dot = export_tree_dot(tree, ["A3", "PR7", "T5"])
        assert dot.startswith("digraph tree {")
        assert dot.count("->") == 6  # 3 internal nodes, 2 edges each
        assert 'n0 [label="A3 <= -12.5\\nn=186"];' in dot
