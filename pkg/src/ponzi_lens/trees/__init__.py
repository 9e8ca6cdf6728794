"""From-scratch tree learners: CART, random forest and gradient boosting."""

from __future__ import annotations

import numpy as np

from .cart import fit_decision_tree, fit_random_forest
from .config import ConfigError, TrainConfig
from .gbdt import Binner, fit_gbdt, soft_threshold
from .persist import load_model, model_from_dict, model_to_dict, models_equal, save_model
from .tree import LEAF, Kind, Tree, TreeEnsemble, sigmoid, split_count_importance

__all__ = [
    "Binner", "ConfigError", "Kind", "LEAF", "TrainConfig", "Tree", "TreeEnsemble",
    "fit", "fit_decision_tree", "fit_gbdt", "fit_random_forest", "load_model",
    "model_from_dict", "model_to_dict", "models_equal", "predict_proba", "save_model",
    "sigmoid", "soft_threshold", "split_count_importance",
]


def fit(matrix, cfg: TrainConfig) -> TreeEnsemble:
    """Train the model family named by ``cfg.model_kind`` on a FeatureMatrix."""
    if len(matrix) == 0:
        raise ValueError("cannot fit on an empty matrix")
    if cfg.model_kind == Kind.GBDT:
        return fit_gbdt(matrix.X, matrix.y, cfg, matrix.feature_names)
    if cfg.model_kind == Kind.RANDOM_FOREST:
        return fit_random_forest(matrix.X, matrix.y, cfg, matrix.feature_names)
    return fit_decision_tree(matrix.X, matrix.y, cfg, matrix.feature_names)


def predict_proba(model: TreeEnsemble, rows) -> np.ndarray:
    """Ponzi probability per row; ``rows`` is an array or a FeatureMatrix.

    A FeatureMatrix is projected onto the model's features by name.
    """
    if hasattr(rows, "feature_names"):
        rows = rows.select(model.feature_names).X
    return model.predict_proba(rows)
