"""CART classification trees (Gini impurity) and bagged random forests."""

from __future__ import annotations

from collections import deque

import numpy as np

from ._kernels import gini_best_split
from .config import TrainConfig
from .gbdt import n_sampled_columns
from .tree import Kind, Tree, TreeBuilder, TreeEnsemble


def grow_cart(X, y, w, cfg: TrainConfig, rng: np.random.Generator | None) -> Tree:
    """Depth-wise Gini tree; leaves hold the weighted Ponzi fraction.

    ``w`` are row multiplicities (bootstrap counts for forests). When ``rng``
    is given, each split considers a fresh random column subset.
    """
    n_features = X.shape[1]
    k = n_sampled_columns(n_features, cfg.colsample)
    rows = np.flatnonzero(w > 0)
    all_cols = np.arange(n_features)
    builder = TreeBuilder()

    def leaf_stats(r):
        tot = w[r].sum()
        return float(np.dot(w[r], y[r]) / tot), float(tot)

    value, cover = leaf_stats(rows)
    root = builder.add(value, cover, 0)
    queue = deque([(root, rows, 0)])
    while queue:
        node, r, depth = queue.popleft()
        if depth >= cfg.max_depth:
            continue
        if rng is not None and k < n_features:
            cols = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            cols = all_cols
        gain, feat, threshold, parent = gini_best_split(X, r, y, w, cols, float(cfg.min_samples_leaf))
        if feat < 0 or not gain > 1e-12 * max(1.0, parent):
            continue
        go_left = X[r, feat] <= threshold
        lr, rr = r[go_left], r[~go_left]
        lv, lc = leaf_stats(lr)
        rv, rc = leaf_stats(rr)
        left = builder.add(lv, lc, depth + 1)
        right = builder.add(rv, rc, depth + 1)
        builder.split(node, feat, threshold, gain, left, right)
        queue.append((left, lr, depth + 1))
        queue.append((right, rr, depth + 1))
    return builder.build()


def fit_decision_tree(X, y, cfg: TrainConfig, feature_names) -> TreeEnsemble:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot fit on an empty matrix")
    tree = grow_cart(X, y, np.ones(len(X)), cfg.replace(colsample=1.0), None)
    return TreeEnsemble(
        kind=Kind.DECISION_TREE,
        trees=[tree],
        feature_names=tuple(feature_names),
        base_score=0.0,
        tree_weight=1.0,
        link="identity",
        config=cfg.to_dict(),
    )


def fit_random_forest(X, y, cfg: TrainConfig, feature_names) -> TreeEnsemble:
    """Bootstrap-bagged CART trees; the forest probability is the mean tree probability."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(X)
    if n == 0:
        raise ValueError("cannot fit on an empty matrix")
    if y.min() == y.max():
        raise ValueError("degenerate labels: forest training needs both classes")
    if cfg.n_estimators < 1:
        raise ValueError("a forest needs at least one tree")
    rng = np.random.default_rng(cfg.seed)
    trees = []
    for _ in range(cfg.n_estimators):
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        trees.append(grow_cart(X, y, w, cfg, rng))
    return TreeEnsemble(
        kind=Kind.RANDOM_FOREST,
        trees=trees,
        feature_names=tuple(feature_names),
        base_score=0.0,
        tree_weight=1.0 / len(trees),
        link="identity",
        config=cfg.to_dict(),
    )
