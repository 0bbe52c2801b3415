import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordforest import evaluate
from chordforest.errors import DataError, ModelError
from chordforest.forest import ForestConfig
from chordforest.synth import SyntheticSpec, generate_synthetic

from conftest import make_dataset


class TestRmse:
    def test_perfect_prediction(self):
        assert evaluate.rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_symmetric_residuals(self):
        assert evaluate.rmse([0.0, 50.0], [25.0, 25.0]) == 25.0

    def test_hand_computed_residual_sum(self):
        # residuals 0, 0, 30 -> sqrt(900/3) = sqrt(300)
        assert evaluate.rmse([-100.0, 0.0, 100.0], [-100.0, 0.0, 70.0]) == pytest.approx(
            math.sqrt(300.0), abs=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            evaluate.rmse([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(DataError):
            evaluate.rmse([], [])


class TestNrmse:
    def test_half(self):
        # rmse 25 over actual range 50
        assert evaluate.nrmse([0.0, 50.0], [25.0, 25.0]) == 0.5

    def test_published_ratio_scale(self):
        # rmse 34 over a full -100..100 actual span gives 0.17
        y = np.array([-100.0, 100.0])
        yhat = y + np.array([34.0, -34.0])
        assert evaluate.nrmse(y, yhat) == pytest.approx(0.17, abs=1e-12)

    def test_constant_actuals_error(self):
        with pytest.raises(DataError):
            evaluate.nrmse([5.0, 5.0], [1.0, 2.0])

    @given(
        st.lists(st.integers(-100, 100), min_size=2, max_size=30).filter(
            lambda v: max(v) > min(v)
        ),
        st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_identity_nrmse_times_range_is_rmse(self, y, seed):
        rng = np.random.default_rng(seed)
        y = np.array(y, dtype=float)
        yhat = rng.uniform(-100, 100, len(y))
        lhs = evaluate.nrmse(y, yhat) * (y.max() - y.min())
        assert abs(lhs - evaluate.rmse(y, yhat)) < 1e-12


class TestThresholdAccuracy:
    def test_count_by_hand(self):
        got = evaluate.threshold_accuracy([0.0, 50.0, -50.0], [20.0, 100.0, -50.0], 25.0)
        assert got == pytest.approx(2.0 / 3.0)

    def test_t200_always_one_on_scale(self):
        rng = np.random.default_rng(0)
        y = rng.uniform(-100, 100, 50)
        yhat = rng.uniform(-100, 100, 50)
        assert evaluate.threshold_accuracy(y, yhat, 200.0) == 1.0

    def test_exact_match_at_zero(self):
        assert evaluate.threshold_accuracy([1.0, 2.0], [1.0, 2.0], 0.0) == 1.0

    def test_negative_threshold_rejected(self):
        with pytest.raises(DataError):
            evaluate.threshold_accuracy([1.0], [1.0], -1.0)


class TestAccuracyCurve:
    def test_single_residual_steps_at_ten(self):
        curve = evaluate.accuracy_curve([0.0], [10.0], [0, 5, 9.999, 10, 15])
        assert list(curve.values()) == [0.0, 0.0, 0.0, 1.0, 1.0]

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_monotone_nondecreasing(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.uniform(-100, 100, 20)
        yhat = rng.uniform(-100, 100, 20)
        vals = list(evaluate.accuracy_curve(y, yhat).values())
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[-1] == 1.0  # t = 200 on this scale

    def test_grid_of_nine(self):
        curve = evaluate.accuracy_curve([0.0], [1.0], range(0, 201, 25))
        assert len(curve) == 9


class TestRandomBaseline:
    def _y47(self):
        rng = np.random.default_rng(123)
        return rng.choice(np.arange(-100, 101, 25), size=47).astype(float)

    def test_t200_mean_one_sd_zero(self):
        base = evaluate.random_baseline(self._y47(), 20, [200.0], seed=1)
        assert base.at(200.0) == (1.0, 0.0)

    def test_t0_mean_zero(self):
        base = evaluate.random_baseline(self._y47(), 20, [0.0], seed=1)
        assert base.at(0.0)[0] == 0.0  # continuous uniform never hits exactly

    def test_mean_in_analytic_band_at_25(self):
        # oracle: P(|U - y_i| <= 25) = (min(y_i+25, 100) - max(y_i-25, -100)) / 200
        y = self._y47()
        expected = np.mean([(min(v + 25, 100) - max(v - 25, -100)) / 200 for v in y])
        base = evaluate.random_baseline(y, 100, [25.0], seed=5)
        mean, sd = base.at(25.0)
        assert 0.18 <= expected <= 0.28
        assert 0.18 <= mean <= 0.28
        assert abs(mean - expected) <= 3 * sd / math.sqrt(100) + 0.02

    def test_same_seed_reproduces(self):
        y = self._y47()
        a = evaluate.random_baseline(y, 10, seed=9)
        b = evaluate.random_baseline(y, 10, seed=9)
        assert a == b

    def test_n_samples_validated(self):
        with pytest.raises(DataError):
            evaluate.random_baseline([0.0], 0)


class TestCrossValidate:
    def _dataset(self, n=40, p=4, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, p)) * 30
        y = X[:, 0] + rng.normal(size=n) * 5
        cols = [f"x{i}" for i in range(p)] + ["y"]
        return make_dataset(cols, np.column_stack([X, y])), [f"x{i}" for i in range(p)]

    def test_singleton_grid(self):
        ds, preds = self._dataset()
        rep = evaluate.cross_validate(ds, "y", preds, [3], k=4,
                                      cfg=ForestConfig(n_trees=5), seed=1)
        assert rep.best_mtry == 3

    def test_best_attains_grid_minimum(self):
        ds, preds = self._dataset(seed=2)
        rep = evaluate.cross_validate(ds, "y", preds, [1, 2, 4], k=3,
                                      cfg=ForestConfig(n_trees=8), seed=2)
        assert rep.recheck()
        assert rep.mean_rmse[rep.grid.index(rep.best_mtry)] == min(rep.mean_rmse)

    def test_paper_pipeline_shape_grid_includes_15(self, sav_schema):
        # external intention model: 29 predictors, caret-style grid with 15
        spec = SyntheticSpec(n=60, adopter_fraction=0.6, missing_rate=0.0)
        ds = generate_synthetic(spec, sav_schema, seed=4)
        preds = sav_schema.external_predictors("BI")
        assert len(preds) == 29
        rep = evaluate.cross_validate(ds, "BI4", preds, [2, 15, 29], k=3,
                                      cfg=ForestConfig(n_trees=5), seed=3)
        assert 15 in rep.grid
        assert rep.best_mtry in (2, 15, 29)

    def test_grid_out_of_range(self):
        ds, preds = self._dataset()
        with pytest.raises(ModelError):
            evaluate.cross_validate(ds, "y", preds, [5], k=3,
                                    cfg=ForestConfig(n_trees=3), seed=0)

    def test_ties_break_to_smallest_mtry(self):
        # constant target: every mtry gives identical (zero) RMSE
        ds = make_dataset(["x0", "x1", "y"],
                          [[float(i), float(-i), 3.0] for i in range(12)])
        rep = evaluate.cross_validate(ds, "y", ["x0", "x1"], [2, 1], k=3,
                                      cfg=ForestConfig(n_trees=3), seed=0)
        assert rep.best_mtry == 1

    def test_deterministic(self):
        ds, preds = self._dataset(seed=5)
        a = evaluate.cross_validate(ds, "y", preds, [1, 3], k=4,
                                    cfg=ForestConfig(n_trees=4), seed=7)
        b = evaluate.cross_validate(ds, "y", preds, [1, 3], k=4,
                                    cfg=ForestConfig(n_trees=4), seed=7)
        assert a == b


class TestDefaultGrid:
    def test_dedup_and_clip(self):
        assert evaluate.default_mtry_grid(29) == (2, 9, 14, 29)
        assert evaluate.default_mtry_grid(3) == (1, 2, 3)
        assert evaluate.default_mtry_grid(1) == (1,)
