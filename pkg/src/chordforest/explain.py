"""Model interpretation: partial dependence and single-tree export.

Partial dependence averages model predictions over the data with one
feature forced to each grid value, giving the feature's marginal effect.
Tree export renders a fitted tree as deterministic indented text (or DOT)
with ``CODE <= threshold`` internal nodes and ``predict = value`` leaves.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .forest import Forest, RegressionTree
from .schema import Dataset

GRID_STEP_VALUES = tuple(float(v) for v in range(-100, 101, 25))
MAX_GRID_POINTS = 101


@dataclass(frozen=True)
class PartialDependenceCurve:
    feature: str
    grid: tuple[float, ...]
    values: tuple[float, ...]
    n_rows: int

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "partial_dependence"])
        for x, v in zip(self.grid, self.values):
            writer.writerow([repr(x), repr(v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def default_grid(observed: np.ndarray) -> tuple[float, ...]:
    """Observed distinct values united with the -100..100 step-25 grid,
    capped at MAX_GRID_POINTS by even subsampling."""
    vals = sorted(set(float(v) for v in observed) | set(GRID_STEP_VALUES))
    if len(vals) > MAX_GRID_POINTS:
        idx = np.linspace(0, len(vals) - 1, MAX_GRID_POINTS).round().astype(int)
        vals = [vals[i] for i in np.unique(idx)]
    return tuple(vals)


def partial_dependence(forest: Forest, data: Dataset, feature: str,
                       grid: Optional[Sequence[float]] = None) -> PartialDependenceCurve:
    if feature not in forest.predictors:
        raise DataError(f"feature {feature!r} is not a model predictor")
    X = data.matrix(forest.predictors, require_complete=True)
    col = forest.predictors.index(feature)
    if grid is None:
        grid_vals = default_grid(X[:, col])
    else:
        grid_vals = tuple(float(g) for g in grid)
        if not grid_vals:
            raise DataError("empty partial-dependence grid")
        if any(b <= a for a, b in zip(grid_vals, grid_vals[1:])):
            raise DataError("partial-dependence grid must be strictly increasing")
    values = []
    Xg = X.copy()
    for g in grid_vals:
        Xg[:, col] = g
        values.append(float(np.mean(forest.predict_matrix(Xg))))
    return PartialDependenceCurve(
        feature=feature,
        grid=grid_vals,
        values=tuple(values),
        n_rows=len(X),
    )


def _fmt(v: float) -> str:
    return format(float(v), "g")


def export_tree(tree: RegressionTree, predictors: Sequence[str]) -> str:
    """Indented text rendering; the then-branch is the x <= threshold side."""
    lines: list[str] = []

    def walk(idx: int, depth: int, prefix: str) -> None:
        pad = "  " * depth
        f = int(tree.feature[idx])
        if f < 0:
            lines.append(f"{pad}{prefix}predict = {_fmt(tree.value[idx])} (n={int(tree.n_samples[idx])})")
            return
        code = predictors[f]
        lines.append(f"{pad}{prefix}{code} <= {_fmt(tree.threshold[idx])} (n={int(tree.n_samples[idx])})")
        walk(int(tree.left[idx]), depth + 1, "then: ")
        walk(int(tree.right[idx]), depth + 1, "else: ")

    walk(0, 0, "")
    return "\n".join(lines) + "\n"


def export_tree_dot(tree: RegressionTree, predictors: Sequence[str]) -> str:
    """Graph-description output for external renderers."""
    lines = ["digraph tree {", "  node [shape=box];"]
    for idx in range(tree.n_nodes):
        f = int(tree.feature[idx])
        if f < 0:
            label = f"predict = {_fmt(tree.value[idx])}\\nn={int(tree.n_samples[idx])}"
        else:
            label = f"{predictors[f]} <= {_fmt(tree.threshold[idx])}\\nn={int(tree.n_samples[idx])}"
        lines.append(f'  n{idx} [label="{label}"];')
    for idx in range(tree.n_nodes):
        if int(tree.feature[idx]) >= 0:
            lines.append(f'  n{idx} -> n{int(tree.left[idx])} [label="yes"];')
            lines.append(f'  n{idx} -> n{int(tree.right[idx])} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
