"""Flat-array binary trees and additive tree ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAF = -1


class TreeBuilder:
    """Append-only node store used by the growers."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self.cover: list[float] = []
        self.depth: list[int] = []

    def add(self, value: float, cover: float, depth: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        self.gain.append(0.0)
        self.cover.append(float(cover))
        self.depth.append(depth)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, gain: float, left: int, right: int):
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.gain[node] = float(gain)
        self.left[node] = left
        self.right[node] = right
        self.value[node] = 0.0

    def build(self) -> "Tree":
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            gain=np.array(self.gain, dtype=np.float64),
            cover=np.array(self.cover, dtype=np.float64),
        )


@dataclass
class Tree:
    """Binary tree in parallel arrays; node 0 is the root.

    Internal nodes route a row left iff ``x[feature] <= threshold``. Leaves
    have ``feature == -1`` and hold their output in ``value``. ``cover`` is
    the number of training rows that reached each node (``None`` for
    hand-built trees that never saw data).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray | None = None
    cover: np.ndarray | None = None

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.gain is None:
            self.gain = np.zeros(len(self.feature))
        self.gain = np.asarray(self.gain, dtype=np.float64)
        if self.cover is not None:
            self.cover = np.asarray(self.cover, dtype=np.float64)

    @classmethod
    def leaf(cls, value: float, cover: float | None = None) -> "Tree":
        return cls([LEAF], [0.0], [LEAF], [LEAF], [value], None,
                   None if cover is None else [cover])

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def n_internal(self) -> int:
        return int(np.count_nonzero(self.feature != LEAF))

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def expected_value(self) -> float:
        """Mean output with every split averaged by its children's cover."""
        if self.cover is None:
            raise ValueError("tree has no cover counts")

        def walk(node):
            if self.feature[node] == LEAF:
                return self.value[node]
            l, r = self.left[node], self.right[node]
            if self.cover[node] <= 0:
                return 0.0
            return (self.cover[l] * walk(l) + self.cover[r] * walk(r)) / self.cover[node]

        return float(walk(0))


class Kind:
    GBDT = "gbdt"
    RANDOM_FOREST = "random_forest"
    DECISION_TREE = "decision_tree"

    ALL = (GBDT, RANDOM_FOREST, DECISION_TREE)


@dataclass
class TreeEnsemble:
    """Additive tree model.

    ``margin(x) = base_score + tree_weight * sum_t tree_t(x)``. Boosted models
    use the logistic link and unit tree weight (leaves already hold shrunken
    values); forests and single trees use the identity link, so their margin
    is the Ponzi probability itself.
    """

    kind: str
    trees: list[Tree]
    feature_names: tuple[str, ...]
    base_score: float = 0.0
    tree_weight: float = 1.0
    link: str = "logit"
    config: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def learning_rate(self) -> float:
        return float(self.config.get("learning_rate", 1.0))

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected rows of width {self.n_features}, got shape {X.shape}"
            )
        return X

    def predict_margin(self, X) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return self.base_score + self.tree_weight * total

    def predict_proba(self, X) -> np.ndarray:
        margin = self.predict_margin(X)
        if self.link == "logit":
            return sigmoid(margin)
        return margin

    @property
    def split_counts(self) -> np.ndarray:
        counts = np.zeros(self.n_features, dtype=np.int64)
        for tree in self.trees:
            used = tree.feature[tree.feature != LEAF]
            counts += np.bincount(used, minlength=self.n_features)
        return counts

    @property
    def has_covers(self) -> bool:
        return all(t.cover is not None for t in self.trees)

    def expected_margin(self) -> float:
        return self.base_score + self.tree_weight * sum(t.expected_value() for t in self.trees)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def split_count_importance(model: TreeEnsemble) -> list[tuple[str, int]]:
    """Features by number of internal nodes testing them, most used first.

    Ties keep catalog order.
    """
    counts = model.split_counts
    order = sorted(range(model.n_features), key=lambda j: (-counts[j], j))
    return [(model.feature_names[j], int(counts[j])) for j in order]
