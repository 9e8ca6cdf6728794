"""Second-order gradient boosting with logistic loss.

Each round fits a regression tree to the gradient ``g = p - y`` and hessian
``h = p (1 - p)`` of the log-loss. A candidate split is scored by

    gain = 1/2 [ T(G_L)^2/(H_L+lam) + T(G_R)^2/(H_R+lam) - T(G)^2/(H+lam) ]

where ``T`` soft-thresholds a gradient sum by the L1 term ``alpha``; the
leaf output is ``-T(G)/(H+lam)`` scaled by the learning rate.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ._kernels import hist_best_split
from .config import ConfigError, TrainConfig
from .tree import Kind, Tree, TreeBuilder, TreeEnsemble, sigmoid


def soft_threshold(G, alpha: float):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def _score(G, H, alpha, lam):
    t = soft_threshold(G, alpha)
    return t * t / (H + lam)


def min_gain(parent_score: float) -> float:
    """Smallest gain accepted for a split.

    Sits just above floating-point noise so that splits with zero gain in
    exact arithmetic stay leaves.
    """
    return 1e-12 * max(1.0, abs(parent_score))


class Binner:
    """Equal-frequency bins per feature.

    Bin ``b`` of feature ``j`` holds values in ``(edges[j][b-1], edges[j][b]]``;
    when a feature has at most ``n_bins`` distinct values every value gets
    its own bin, so histogram splits coincide with exact ones.
    """

    def __init__(self, edges: list[np.ndarray]):
        self.edges = edges
        self.max_bins = max((len(e) for e in edges), default=1)

    @classmethod
    def fit(cls, X: np.ndarray, n_bins: int) -> "Binner":
        edges = []
        for j in range(X.shape[1]):
            values = np.unique(X[:, j])
            if len(values) <= n_bins:
                edges.append(values)
                continue
            sorted_col = np.sort(X[:, j])
            n = len(sorted_col)
            ranks = np.ceil(np.arange(1, n_bins + 1) * n / n_bins).astype(np.int64) - 1
            edges.append(np.unique(sorted_col[ranks]))
        return cls(edges)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            out[:, j] = np.minimum(np.searchsorted(e, X[:, j], side="left"), len(e) - 1)
        return out


def _leaf_value(G, H, cfg: TrainConfig) -> float:
    return float(-soft_threshold(G, cfg.reg_alpha) / (H + cfg.reg_lambda) * cfg.learning_rate)


def _best_exact_split(X_node, g, h, cols, cfg: TrainConfig):
    """Best (gain, column position, threshold) over sorted distinct values."""
    alpha, lam = cfg.reg_alpha, cfg.reg_lambda
    G, H = g.sum(), h.sum()
    parent = float(_score(G, H, alpha, lam))
    n = len(g)
    best = None
    for pos, j in enumerate(cols):
        order = np.argsort(X_node[:, j], kind="stable")
        xs = X_node[order, j]
        GL = np.cumsum(g[order])[:-1]
        HL = np.cumsum(h[order])[:-1]
        NL = np.arange(1, n)
        GR, HR, NR = G - GL, H - HL, n - NL
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (_score(GL, HL, alpha, lam) + _score(GR, HR, alpha, lam) - parent)
        valid = (
            (xs[:-1] < xs[1:])
            & (NL >= cfg.min_samples_leaf) & (NR >= cfg.min_samples_leaf)
            & (HL >= cfg.min_child_weight) & (HR >= cfg.min_child_weight)
        )
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best[0]:
            best = (float(gain[i]), pos, float(xs[i]))
    if best is None or not best[0] > min_gain(parent):
        return None
    return best


def grow_tree(X, binned, g, h, cols, cfg: TrainConfig, binner: Binner | None):
    """Grow one depth-wise regression tree.

    Returns the tree and the leaf index of every training row.
    """
    n = len(g)
    builder = TreeBuilder()
    leaf_of_row = np.zeros(n, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if binner is not None:
        tree_bins = np.ascontiguousarray(binned[:, cols])
        n_bins = np.array([len(binner.edges[j]) for j in cols], dtype=np.int64)

    root_rows = np.arange(n)
    root = builder.add(_leaf_value(g.sum(), h.sum(), cfg), n, 0)
    queue = deque([(root, root_rows, 0)])
    while queue:
        node, rows, depth = queue.popleft()
        leaf_of_row[rows] = node
        if depth >= cfg.max_depth or len(rows) < 2 * cfg.min_samples_leaf:
            continue
        if binner is not None:
            gain, pos, b, parent = hist_best_split(
                tree_bins, rows, g, h, n_bins, binner.max_bins, cfg.reg_alpha,
                cfg.reg_lambda, cfg.min_samples_leaf, cfg.min_child_weight,
            )
            if pos < 0 or not gain > min_gain(parent):
                continue
            feat = int(cols[pos])
            threshold = float(binner.edges[feat][b])
            go_left = tree_bins[rows, pos] <= b
        else:
            found = _best_exact_split(X[rows], g[rows], h[rows], cols, cfg)
            if found is None:
                continue
            gain, pos, threshold = found
            feat = int(cols[pos])
            go_left = X[rows, feat] <= threshold
        lrows, rrows = rows[go_left], rows[~go_left]
        left = builder.add(_leaf_value(g[lrows].sum(), h[lrows].sum(), cfg), len(lrows), depth + 1)
        right = builder.add(_leaf_value(g[rrows].sum(), h[rrows].sum(), cfg), len(rrows), depth + 1)
        builder.split(node, feat, threshold, gain, left, right)
        queue.append((left, lrows, depth + 1))
        queue.append((right, rrows, depth + 1))
    return builder.build(), leaf_of_row


def n_sampled_columns(n_features: int, fraction: float) -> int:
    return max(1, min(n_features, int(np.floor(fraction * n_features + 0.5))))


def fit_gbdt(X, y, cfg: TrainConfig, feature_names, callback=None) -> TreeEnsemble:
    """Boost ``cfg.n_estimators`` trees on rows ``X`` with 0/1 labels ``y``.

    ``callback(round, margin)`` is invoked after every round with the
    current training margins.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("cannot fit on an empty matrix")
    prior = y.mean()
    if prior <= 0 or prior >= 1:
        raise ValueError("degenerate labels: boosting needs both classes")
    if cfg.n_bins < 2:
        raise ConfigError("n_bins must be >= 2")

    base = float(np.log(prior / (1 - prior)))
    n_features = X.shape[1]
    binner = Binner.fit(X, cfg.n_bins) if cfg.tree_method == "hist" else None
    binned = binner.transform(X) if binner is not None else None
    rng = np.random.default_rng(cfg.seed)
    k = n_sampled_columns(n_features, cfg.colsample)

    margin = np.full(len(X), base)
    trees: list[Tree] = []
    for t in range(cfg.n_estimators):
        p = sigmoid(margin)
        g = p - y
        h = p * (1 - p)
        if k < n_features:
            cols = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            cols = np.arange(n_features)
        tree, leaf_of_row = grow_tree(X, binned, g, h, cols, cfg, binner)
        trees.append(tree)
        margin = margin + tree.value[leaf_of_row]
        if callback is not None:
            callback(t, margin)

    return TreeEnsemble(
        kind=Kind.GBDT,
        trees=trees,
        feature_names=tuple(feature_names),
        base_score=base,
        tree_weight=1.0,
        link="logit",
        config=cfg.to_dict(),
    )
