"""Random-forest regression with a compiled split kernel and numpy fallback."""

from .backend import BACKEND
from .core import (
    Forest,
    ForestConfig,
    RegressionTree,
    best_split,
    canonical_json,
    fit_forest,
    impurity_importance,
    oob_predictions,
    permutation_importance,
    replay_leaf_means,
)

__all__ = [
    "BACKEND",
    "Forest",
    "ForestConfig",
    "RegressionTree",
    "best_split",
    "canonical_json",
    "fit_forest",
    "impurity_importance",
    "oob_predictions",
    "permutation_importance",
    "replay_leaf_means",
]
