"""Model evaluation: RMSE/NRMSE, threshold-accuracy curves, random baseline,
and k-fold cross-validation over an mtry grid.

NRMSE normalizes by the range of the *actual* values, so train and test
rows of a report each use their own range.  Threshold accuracy counts a
prediction as correct when it lands within +-t of the actual value; on the
-100..100 response scale every prediction is correct at t = 200.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, ModelError
from .forest import Forest, ForestConfig, fit_forest
from .rng import STAGE_BASELINE, STAGE_CV_FIT, STAGE_CV_SHUFFLE, derive_seed, stream
from .schema import Dataset

DEFAULT_THRESHOLDS = tuple(range(0, 201, 5))
SCALE_MIN = -100.0
SCALE_MAX = 100.0


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise DataError(f"y and yhat must be equal-length vectors, got {y.shape} vs {yhat.shape}")
    if len(y) == 0:
        raise DataError("empty input")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def nrmse(y, yhat) -> float:
    """RMSE divided by the range of the actual values."""
    y, yhat = _pair(y, yhat)
    span = float(np.max(y) - np.min(y))
    if span <= 0:
        raise DataError("nrmse undefined: actual values have zero range")
    return rmse(y, yhat) / span


def threshold_accuracy(y, yhat, t: float) -> float:
    if t < 0:
        raise DataError(f"threshold must be >= 0, got {t}")
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(yhat - y) <= t))


def accuracy_curve(y, yhat, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> dict[float, float]:
    """Pointwise threshold accuracy; nondecreasing in t by construction."""
    y, yhat = _pair(y, yhat)
    err = np.abs(yhat - y)
    out: dict[float, float] = {}
    for t in thresholds:
        if t < 0:
            raise DataError(f"threshold must be >= 0, got {t}")
        out[float(t)] = float(np.mean(err <= t))
    return out


@dataclass(frozen=True)
class BaselineCurve:
    thresholds: tuple[float, ...]
    mean_accuracy: tuple[float, ...]
    stddev: tuple[float, ...]
    n_samples: int
    seed: int

    def at(self, t: float) -> tuple[float, float]:
        i = self.thresholds.index(float(t))
        return self.mean_accuracy[i], self.stddev[i]

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "mean_accuracy": list(self.mean_accuracy),
            "stddev": list(self.stddev),
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


def random_baseline(y, n_samples: int, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                    seed: int = 0) -> BaselineCurve:
    """Accuracy of uniformly random guesses on [-100, 100] against ``y``.

    Each of the ``n_samples`` replicates draws len(y) continuous uniform
    values; the curve reports the per-threshold mean and population
    standard deviation over replicates.
    """
    if n_samples < 1:
        raise DataError(f"n_samples must be >= 1, got {n_samples}")
    y = np.asarray(y, dtype=np.float64)
    ts = [float(t) for t in thresholds]
    acc = np.empty((n_samples, len(ts)))
    for i in range(n_samples):
        guess = stream(seed, STAGE_BASELINE, i).uniform(SCALE_MIN, SCALE_MAX, size=len(y))
        err = np.abs(guess - y)
        for j, t in enumerate(ts):
            acc[i, j] = np.mean(err <= t)
    return BaselineCurve(
        thresholds=tuple(ts),
        mean_accuracy=tuple(float(v) for v in acc.mean(axis=0)),
        stddev=tuple(float(v) for v in acc.std(axis=0)),
        n_samples=int(n_samples),
        seed=int(seed),
    )


@dataclass(frozen=True)
class CvReport:
    folds: int
    grid: tuple[int, ...]
    mean_rmse: tuple[float, ...]
    best_mtry: int

    def recheck(self) -> bool:
        best = min(zip(self.mean_rmse, self.grid))
        return best[1] == self.best_mtry

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "grid": list(self.grid),
            "mean_rmse": list(self.mean_rmse),
            "best_mtry": self.best_mtry,
        }


def cross_validate(train: Dataset, target: str, predictors: Sequence[str],
                   grid: Sequence[int], k: int, cfg: ForestConfig, seed: int,
                   workers: int = 1) -> CvReport:
    """k-fold CV over an mtry grid; folds are contiguous blocks of one
    seeded shuffle.  Best mtry minimizes mean held-out RMSE, ties to the
    smallest mtry."""
    predictors = tuple(predictors)
    grid = [int(m) for m in grid]
    if not grid:
        raise ModelError("empty mtry grid")
    for m in grid:
        if not 1 <= m <= len(predictors):
            raise ModelError(f"grid mtry {m} outside [1, {len(predictors)}]")
    if k < 2:
        raise ModelError(f"need k >= 2 folds, got {k}")
    n = train.n_rows
    if n < k:
        raise ModelError(f"cannot make {k} folds from {n} rows")

    perm = stream(seed, STAGE_CV_SHUFFLE).permutation(n)
    folds = np.array_split(perm, k)
    mean_rmse: list[float] = []
    for mi, mtry in enumerate(grid):
        fold_rmse = []
        for fi, fold in enumerate(folds):
            mask = np.ones(n, dtype=bool)
            mask[fold] = False
            fit_ds = train.subset(np.flatnonzero(mask))
            val_ds = train.subset(np.sort(fold))
            fcfg = ForestConfig(
                n_trees=cfg.n_trees,
                mtry=mtry,
                min_node_size=cfg.min_node_size,
                max_depth=cfg.max_depth,
                seed=derive_seed(seed, STAGE_CV_FIT, mi, fi),
            )
            forest = fit_forest(fit_ds, target, predictors, fcfg, workers=workers)
            yhat = forest.predict_dataset(val_ds)
            yval = val_ds.matrix([target], require_complete=True)[:, 0]
            fold_rmse.append(rmse(yval, yhat))
        mean_rmse.append(float(np.mean(fold_rmse)))

    best = min(zip(mean_rmse, grid))[1]
    return CvReport(folds=int(k), grid=tuple(grid), mean_rmse=tuple(mean_rmse), best_mtry=int(best))


def default_mtry_grid(n_predictors: int) -> tuple[int, ...]:
    """{2, p/3, p/2, p}, deduplicated and clipped to [1, p]."""
    p = int(n_predictors)
    cand = [2, p // 3, p // 2, p]
    out: list[int] = []
    for m in cand:
        m = min(max(m, 1), p)
        if m not in out:
            out.append(m)
    return tuple(sorted(out))


@dataclass(frozen=True)
class EvaluationReport:
    """Per-(target, class) model performance summary."""

    target: str
    model_class: str  # "external" | "internal"
    mtry: int
    n_train: int
    n_test: int
    rmse_train: float
    rmse_test: float
    nrmse_train: float
    nrmse_test: float
    y_range_train: tuple[float, float]
    y_range_test: tuple[float, float]
    thresholds: tuple[float, ...]
    accuracy_train: tuple[float, ...]
    accuracy_test: tuple[float, ...]

    def accuracy_at(self, t: float) -> float:
        return self.accuracy_test[self.thresholds.index(float(t))]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "model_class": self.model_class,
            "mtry": self.mtry,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "rmse_train": self.rmse_train,
            "rmse_test": self.rmse_test,
            "nrmse_train": self.nrmse_train,
            "nrmse_test": self.nrmse_test,
            "y_range_train": list(self.y_range_train),
            "y_range_test": list(self.y_range_test),
            "thresholds": list(self.thresholds),
            "accuracy_train": list(self.accuracy_train),
            "accuracy_test": list(self.accuracy_test),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate_model(forest: Forest, train: Dataset, test: Dataset, model_class: str,
                   thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> EvaluationReport:
    y_tr = train.matrix([forest.target], require_complete=True)[:, 0]
    y_te = test.matrix([forest.target], require_complete=True)[:, 0]
    yhat_tr = forest.predict_dataset(train)
    yhat_te = forest.predict_dataset(test)
    ts = tuple(float(t) for t in thresholds)
    acc_tr = accuracy_curve(y_tr, yhat_tr, ts)
    acc_te = accuracy_curve(y_te, yhat_te, ts)
    return EvaluationReport(
        target=forest.target,
        model_class=model_class,
        mtry=forest.config.resolve_mtry(len(forest.predictors)),
        n_train=len(y_tr),
        n_test=len(y_te),
        rmse_train=rmse(y_tr, yhat_tr),
        rmse_test=rmse(y_te, yhat_te),
        nrmse_train=nrmse(y_tr, yhat_tr),
        nrmse_test=nrmse(y_te, yhat_te),
        y_range_train=(float(np.min(y_tr)), float(np.max(y_tr))),
        y_range_test=(float(np.min(y_te)), float(np.max(y_te))),
        thresholds=ts,
        accuracy_train=tuple(acc_tr[t] for t in ts),
        accuracy_test=tuple(acc_te[t] for t in ts),
    )


def accuracy_table_csv(report: EvaluationReport, baseline: BaselineCurve) -> str:
    """CSV of the plotted series: threshold, model accuracy, baseline mean/sd."""
    if report.thresholds != baseline.thresholds:
        raise ModelError("report and baseline threshold grids differ")
    lines = ["threshold,model_accuracy,baseline_mean,baseline_sd"]
    for t, a, bm, bs in zip(report.thresholds, report.accuracy_test,
                            baseline.mean_accuracy, baseline.stddev):
        lines.append(f"{t:g},{a!r},{bm!r},{bs!r}")
    return "\n".join(lines) + "\n"
