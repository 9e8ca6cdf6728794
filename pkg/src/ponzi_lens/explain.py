"""Exact Shapley attributions for tree ensembles.

Attributions live in margin space (log-odds for boosted models). The game
is the path-dependent one: the value of a coalition S is the expected tree
output when features outside S are integrated out by following both
children in proportion to their training cover.

Within one tree that value decomposes over leaves. For a leaf whose root
path tests the distinct features D, let z_j be the product of cover ratios
along the edges testing j, and o_j(x) = 1 when x satisfies every condition
on j along the path. The leaf contributes ``v * prod_{j in S} o_j *
prod_{j in D-S} z_j``, a product game whose Shapley value for feature i is

    v (o_i - z_i) sum_s w(s, |D|) [t^s] prod_{j != i} (z_j + o_j t),

with w(s, d) = s! (d-s-1)! / d!. The polynomial is built once per
(leaf, row) and the factor of feature i is divided back out.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .features import FeatureMatrix
from .trees import LEAF, Tree, TreeEnsemble


class MissingCoversError(ValueError):
    pass


@dataclass
class ShapMatrix:
    phi: np.ndarray  # (rows, features)
    base_value: float
    feature_names: tuple[str, ...]

    def margins(self) -> np.ndarray:
        return self.base_value + self.phi.sum(axis=1)


def _leaf_paths(tree: Tree):
    """For each leaf: (value, {feature: (lo, hi, z)}) with lo < x <= hi on its path."""
    out = []
    stack = [(0, {})]
    while stack:
        node, conds = stack.pop()
        f = tree.feature[node]
        if f == LEAF:
            out.append((tree.value[node], conds))
            continue
        thr = tree.threshold[node]
        cover = tree.cover[node]
        for child, left in ((tree.left[node], True), (tree.right[node], False)):
            lo, hi, z = conds.get(f, (-np.inf, np.inf, 1.0))
            if left:
                hi = min(hi, thr)
            else:
                lo = max(lo, thr)
            ratio = tree.cover[child] / cover if cover > 0 else 0.0
            nxt = dict(conds)
            nxt[f] = (lo, hi, z * ratio)
            stack.append((child, nxt))
    return out


def _shapley_weight_table(d_max: int) -> np.ndarray:
    """W[d, s] = s! (d-s-1)! / d! for 1 <= d <= d_max, 0 <= s < d."""
    W = np.zeros((d_max + 1, max(d_max, 1)))
    for d in range(1, d_max + 1):
        for s in range(d):
            W[d, s] = math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d)
    return W


def _pack_leaves(model: TreeEnsemble):
    """All leaves of the ensemble with non-empty paths, as padded arrays."""
    leaves = []
    for tree in model.trees:
        for value, conds in _leaf_paths(tree):
            if conds and value != 0.0:
                leaves.append((value * model.tree_weight, conds))
    d_max = max((len(c) for _, c in leaves), default=0)
    L = len(leaves)
    values = np.zeros(L)
    depth = np.zeros(L, dtype=np.int64)
    feats = np.zeros((L, max(d_max, 1)), dtype=np.int64)
    lo = np.zeros((L, max(d_max, 1)))
    hi = np.zeros((L, max(d_max, 1)))
    z = np.zeros((L, max(d_max, 1)))
    for l, (value, conds) in enumerate(leaves):
        values[l] = value
        depth[l] = len(conds)
        for j, (f, (a, b, zz)) in enumerate(conds.items()):
            feats[l, j], lo[l, j], hi[l, j], z[l, j] = f, a, b, zz
    return values, depth, feats, lo, hi, z, _shapley_weight_table(d_max)


@njit(cache=True)
def _leaf_shap_kernel(X, values, depth, feats, lo, hi, z, W, phi):
    n = X.shape[0]
    d_max = feats.shape[1]
    P = np.empty(d_max + 1)
    Q = np.empty(d_max)
    o = np.empty(d_max)
    for l in range(values.shape[0]):
        d = depth[l]
        v = values[l]
        for r in range(n):
            for j in range(d):
                x = X[r, feats[l, j]]
                o[j] = 1.0 if (x > lo[l, j] and x <= hi[l, j]) else 0.0
            # coefficients of prod_j (z_j + o_j t)
            P[0] = 1.0
            for k in range(1, d + 1):
                P[k] = 0.0
            for j in range(d):
                zj = z[l, j]
                for k in range(j + 1, 0, -1):
                    P[k] = P[k] * zj + P[k - 1] * o[j]
                P[0] *= zj
            for i in range(d):
                zi = z[l, i]
                oi = o[i]
                if oi == 0.0 and zi == 0.0:
                    continue
                total = 0.0
                if oi > 0.0:
                    # divide out (z_i + t) by backward recurrence
                    Q[d - 1] = P[d]
                    for s in range(d - 1, 0, -1):
                        Q[s - 1] = P[s] - zi * Q[s]
                    for s in range(d):
                        total += Q[s] * W[d, s]
                else:
                    for s in range(d):
                        total += P[s] * W[d, s]
                    total /= zi
                phi[r, feats[l, i]] += v * (oi - zi) * total


def tree_shap(model: TreeEnsemble, rows) -> ShapMatrix:
    """Path-dependent exact Shapley values, summed over the ensemble's trees."""
    if hasattr(rows, "feature_names"):
        rows = rows.select(model.feature_names).X
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected rows of width {model.n_features}, got shape {X.shape}")
    if not model.has_covers:
        raise MissingCoversError("explainability requires fit-time covers")
    phi = np.zeros(X.shape)
    packed = _pack_leaves(model)
    if len(X) and len(packed[0]):
        _leaf_shap_kernel(np.ascontiguousarray(X), *packed, phi)
    return ShapMatrix(phi, model.expected_margin(), model.feature_names)


# --- brute-force oracle --------------------------------------------------------

MAX_BRUTE_FORCE_FEATURES = 12


def _conditional_expectation(tree: Tree, x: np.ndarray, known: frozenset) -> float:
    def walk(node):
        f = tree.feature[node]
        if f == LEAF:
            return tree.value[node]
        l, r = tree.left[node], tree.right[node]
        if f in known:
            return walk(l if x[f] <= tree.threshold[node] else r)
        c = tree.cover[node]
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / c
    return walk(0)


def coalition_value(model: TreeEnsemble, x, known) -> float:
    known = frozenset(known)
    x = np.asarray(x, dtype=np.float64)
    return model.base_score + model.tree_weight * sum(
        _conditional_expectation(t, x, known) for t in model.trees
    )


def brute_force_shapley(model: TreeEnsemble, row) -> np.ndarray:
    """Shapley values of one row by enumerating all 2^F coalitions."""
    F = model.n_features
    if F > MAX_BRUTE_FORCE_FEATURES:
        raise ValueError(f"brute force is limited to {MAX_BRUTE_FORCE_FEATURES} features, model has {F}")
    if not model.has_covers:
        raise MissingCoversError("explainability requires fit-time covers")
    value = {}
    for size in range(F + 1):
        for S in itertools.combinations(range(F), size):
            value[S] = coalition_value(model, row, S)
    phi = np.zeros(F)
    for i in range(F):
        others = [j for j in range(F) if j != i]
        for size in range(F):
            weight = math.factorial(size) * math.factorial(F - size - 1) / math.factorial(F)
            for S in itertools.combinations(others, size):
                with_i = tuple(sorted(S + (i,)))
                phi[i] += weight * (value[with_i] - value[S])
    return phi


# --- plot data -----------------------------------------------------------------


@dataclass
class ShapSummary:
    ranking: list[tuple[str, float]]  # (feature, mean |phi|), most important first
    beeswarm: list[tuple[str, int, float, float]]  # (feature, row, phi, feature value)


def shap_summary(sm: ShapMatrix, matrix: FeatureMatrix) -> ShapSummary:
    """Rank features by mean absolute attribution; ties keep catalog order."""
    X = matrix.select(sm.feature_names).X
    if X.shape != sm.phi.shape:
        raise ValueError("SHAP matrix and feature matrix disagree in shape")
    mean_abs = np.abs(sm.phi).mean(axis=0) if len(X) else np.zeros(len(sm.feature_names))
    order = sorted(range(len(sm.feature_names)), key=lambda j: (-mean_abs[j], j))
    ranking = [(sm.feature_names[j], float(mean_abs[j])) for j in order]
    swarm = [
        (sm.feature_names[j], r, float(sm.phi[r, j]), float(X[r, j]))
        for j in order for r in range(len(X))
    ]
    return ShapSummary(ranking, swarm)


@dataclass
class DependenceTable:
    feature: str
    interaction: str
    rows: list[tuple[float, float, float]]  # (feature value, phi, interaction value)


def dependence_data(sm: ShapMatrix, matrix: FeatureMatrix, feature: str, interaction: str) -> DependenceTable:
    for name in (feature, interaction):
        if name not in sm.feature_names:
            raise KeyError(f"feature {name!r} not in the explained catalog")
    j = sm.feature_names.index(feature)
    xf = matrix.column(feature)
    xi = matrix.column(interaction)
    rows = [(float(a), float(p), float(b)) for a, p, b in zip(xf, sm.phi[:, j], xi)]
    return DependenceTable(feature, interaction, rows)


def pick_interaction(sm: ShapMatrix, matrix: FeatureMatrix, feature: str) -> str:
    """Partner whose median split explains most variance of ``feature``'s attributions."""
    j = sm.feature_names.index(feature)
    phi = sm.phi[:, j]
    best, best_score = None, -1.0
    for name in sm.feature_names:
        if name == feature:
            continue
        col = matrix.column(name)
        mask = col <= np.median(col)
        if mask.all() or not mask.any():
            score = 0.0
        else:
            a, b = phi[mask], phi[~mask]
            score = (len(a) * (a.mean() - phi.mean()) ** 2 + len(b) * (b.mean() - phi.mean()) ** 2) / len(phi)
        if score > best_score:
            best, best_score = name, score
    return best if best is not None else feature


def check_local_accuracy(sm: ShapMatrix, model: TreeEnsemble, rows, tol: float = 1e-8) -> float:
    """Largest |base + sum(phi) - margin| over rows; raises if it exceeds ``tol``."""
    if hasattr(rows, "feature_names"):
        rows = rows.select(model.feature_names).X
    margin = model.predict_margin(rows)
    err = float(np.max(np.abs(sm.margins() - margin))) if len(margin) else 0.0
    if err > tol:
        raise AssertionError(f"SHAP local accuracy violated: max error {err:.3g} > {tol:g}")
    return err


def top_features(summary: ShapSummary, k: int) -> Sequence[str]:
    return [name for name, _ in summary.ranking[:k]]
