"""Classification metrics, stratified splitting and the McNemar test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def n(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    auc: float
    f1: float
    precision: float
    recall: float

    def to_dict(self) -> dict:
        return asdict(self)

    def rounded(self, digits: int = 3) -> dict:
        return {k: round(v, digits) for k, v in asdict(self).items()}


def _as_arrays(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ValueError(f"length mismatch: {labels.shape} labels vs {scores.shape} scores")
    return labels.astype(np.int64), scores


def confusion(labels, probabilities, threshold: float = 0.5) -> ConfusionMatrix:
    """Counts of predicted vs true class; a row is predicted Ponzi when p >= threshold."""
    y, p = _as_arrays(labels, probabilities)
    pred = p >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tp=int(np.sum(pred & pos)),
    )


def _safe_div(a, b) -> float:
    return a / b if b else 0.0


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Tied scores get their average rank, i.e. a tied positive/negative pair
    counts one half.
    """
    y, s = _as_arrays(labels, scores)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average 1-based rank of each tie group
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(avg, ends - starts)
    # rank sums are half-integers, so this subtraction is exact
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(labels, scores) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) at every distinct score, highest threshold first.

    The first point is (inf, 0, 0).
    """
    y, s = _as_arrays(labels, scores)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    tps = np.cumsum(y_sorted == 1)
    fps = np.cumsum(y_sorted == 0)
    last = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    pts = [(math.inf, 0.0, 0.0)]
    for thr, fp, tp in zip(s_sorted[last], fps[last], tps[last]):
        pts.append((float(thr), _safe_div(int(fp), n_neg), _safe_div(int(tp), n_pos)))
    return pts


def metrics(cm: ConfusionMatrix, labels=None, probabilities=None) -> MetricReport:
    precision = _safe_div(cm.tp, cm.tp + cm.fp)
    recall = _safe_div(cm.tp, cm.tp + cm.fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    auc = float("nan")
    if labels is not None and probabilities is not None:
        auc = roc_auc(labels, probabilities)
    return MetricReport(
        accuracy=_safe_div(cm.tp + cm.tn, cm.n),
        auc=auc,
        f1=f1,
        precision=precision,
        recall=recall,
    )


def evaluate(labels, probabilities, threshold: float = 0.5) -> tuple[ConfusionMatrix, MetricReport]:
    cm = confusion(labels, probabilities, threshold)
    return cm, metrics(cm, labels, probabilities)


# --- splitting ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int


def _class_members(labels) -> dict[int, np.ndarray]:
    y = np.asarray(labels).astype(np.int64)
    return {int(c): np.flatnonzero(y == c) for c in np.unique(y)}


def allocate_test_counts(class_sizes: list[int], test_fraction: float) -> list[int]:
    """Per-class test sizes summing to ceil(n * test_fraction).

    Largest-remainder allocation: each class gets floor(n_c * f) and the
    leftover slots go to the largest fractional parts (ties to the lower
    class), so every class is within one sample of its exact share.
    """
    n = sum(class_sizes)
    # str() recovers the decimal the caller wrote, so 10 * 0.2 is exactly 2
    frac = Fraction(str(test_fraction))
    exact = [c * frac for c in class_sizes]
    target = math.ceil(n * frac)
    counts = [math.floor(e) for e in exact]
    leftover = target - sum(counts)
    by_remainder = sorted(range(len(exact)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in by_remainder[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(labels, test_fraction: float, seed: int) -> SplitPlan:
    """Stratified train/test split with a seeded shuffle inside each class."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    members = _class_members(labels)
    if len(members) < 2:
        raise ValueError("stratified split needs both classes; a class has 0 members")
    rng = np.random.default_rng(seed)
    classes = sorted(members)
    counts = allocate_test_counts([len(members[c]) for c in classes], test_fraction)
    train, test = [], []
    for c, k in zip(classes, counts):
        idx = rng.permutation(members[c])
        test.append(idx[:k])
        train.append(idx[k:])
    return SplitPlan(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), seed)


def kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Stratified k-fold partition of ``range(len(labels))``.

    Classes are shuffled, concatenated and dealt round-robin, so every fold
    gets a near-equal share of each class and fold sizes differ by at most 1.
    Returns the validation indices of each fold, sorted.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    members = _class_members(labels)
    small = {c: len(m) for c, m in members.items() if len(m) < k}
    if small:
        raise ValueError(f"classes smaller than k={k}: {small}")
    rng = np.random.default_rng(seed)
    dealt = np.concatenate([rng.permutation(members[c]) for c in sorted(members)])
    return [np.sort(dealt[f::k]) for f in range(k)]


def fold_pairs(labels, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, validation) index pairs for each fold."""
    n = len(labels)
    out = []
    for val in kfold(labels, k, seed):
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        out.append((np.flatnonzero(mask), val))
    return out


# --- McNemar -----------------------------------------------------------------


@dataclass(frozen=True)
class McNemarResult:
    b: int  # a right, b wrong
    c: int  # a wrong, b right
    p_value: float
    p_value_chi2: float  # chi-square with continuity correction, for comparison
    degenerate: bool  # no discordant pairs

    def to_dict(self) -> dict:
        return asdict(self)


def exact_binomial_two_sided(b: int, c: int) -> float:
    """min(1, 2 P(Bin(b+c, 1/2) >= max(b, c))), computed in exact rationals."""
    n = b + c
    if n == 0:
        return 1.0
    hi = max(b, c)
    tail = sum(math.comb(n, i) for i in range(hi, n + 1))
    return float(min(Fraction(1), Fraction(2 * tail, 2**n)))


def mcnemar(labels, preds_a, preds_b) -> McNemarResult:
    y = np.asarray(labels).astype(np.int64)
    a = np.asarray(preds_a).astype(np.int64)
    bb = np.asarray(preds_b).astype(np.int64)
    if not (y.shape == a.shape == bb.shape):
        raise ValueError("labels and predictions differ in length")
    a_ok = a == y
    b_ok = bb == y
    b = int(np.sum(a_ok & ~b_ok))
    c = int(np.sum(~a_ok & b_ok))
    if b + c == 0:
        return McNemarResult(b, c, 1.0, 1.0, True)
    stat = (abs(b - c) - 1) ** 2 / (b + c) if abs(b - c) >= 1 else 0.0
    p_chi2 = math.erfc(math.sqrt(stat / 2))
    return McNemarResult(b, c, exact_binomial_two_sided(b, c), min(1.0, p_chi2), False)
