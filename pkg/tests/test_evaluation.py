import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles.stat_oracles import PUBLISHED, binomial_tail_oracle, pairwise_auc
from ponzi_lens.evaluation import (
    ConfusionMatrix, allocate_test_counts, confusion, evaluate, exact_binomial_two_sided,
    fold_pairs, kfold, mcnemar, metrics, roc_auc, roc_points, stratified_split,
)


@pytest.mark.parametrize("name", sorted(PUBLISHED))
def test_published_matrices_reproduce_table(name):
    (tn, fp, fn, tp), (acc, prec, rec, f1) = PUBLISHED[name]
    rep = metrics(ConfusionMatrix(tn, fp, fn, tp))
    r = rep.rounded(3)
    assert (r["accuracy"], r["precision"], r["recall"], r["f1"]) == (acc, prec, rec, f1)
    assert tn + fp + fn + tp == 885 and fn + tp == 135


def test_confusion_threshold_is_inclusive():
    cm = confusion([0, 0, 1, 1], [0.5, 0.49, 0.5, 0.2])
    assert cm == ConfusionMatrix(tn=1, fp=1, fn=1, tp=1)
    assert confusion([1], [0.3], threshold=0.3).tp == 1


def test_zero_denominators():
    rep = metrics(ConfusionMatrix(5, 0, 3, 0))
    assert rep.precision == 0 and rep.recall == 0 and rep.f1 == 0
    assert math.isnan(rep.auc)


def test_evaluate_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        evaluate([0, 1], [0.1])


def test_auc_simple_cases():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert roc_auc([0, 0, 1, 1], [0.9, 0.8, 0.1, 0.2]) == 0.0
    assert roc_auc([0, 1, 0, 1], [0.5] * 4) == 0.5
    with pytest.raises(ValueError, match="both classes"):
        roc_auc([1, 1], [0.1, 0.2])


def test_auc_matches_pairwise_oracle_on_random_vectors():
    rng = np.random.default_rng(11)
    for trial in range(200):
        n = int(rng.integers(2, 80))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        if trial % 2:  # heavy ties: at most 4 distinct scores
            s = rng.integers(0, 4, size=n) / 4
        else:
            s = rng.random(n)
        assert abs(roc_auc(y, s) - float(pairwise_auc(y, s))) <= 1e-12


def test_roc_points_shape():
    pts = roc_points([0, 1, 0, 1], [0.1, 0.9, 0.4, 0.4])
    assert pts[0] == (math.inf, 0.0, 0.0)
    assert pts[-1][1:] == (1.0, 1.0)
    assert pts == [(math.inf, 0.0, 0.0), (0.9, 0.0, 0.5), (0.4, 0.5, 1.0), (0.1, 1.0, 1.0)]
    fprs = [p[1] for p in pts]
    assert fprs == sorted(fprs)


def test_roc_trapezoid_equals_auc():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 200)
    s = rng.integers(0, 10, 200) / 10
    pts = roc_points(y, s)
    fpr = np.array([p[1] for p in pts])
    tpr = np.array([p[2] for p in pts])
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    assert area == pytest.approx(roc_auc(y, s), abs=1e-12)


def test_split_of_full_size_dataset():
    y = np.array([1] * 673 + [0] * 3749)
    plan = stratified_split(y, 0.2, seed=0)
    assert len(plan.test_indices) == 885
    assert int(y[plan.test_indices].sum()) == 135
    assert len(plan.train_indices) == 3537
    assert set(plan.train_indices).isdisjoint(plan.test_indices)
    assert len(set(plan.train_indices) | set(plan.test_indices)) == 4422


def test_allocate_test_counts():
    assert allocate_test_counts([673, 3749], 0.2) == [135, 750]
    assert allocate_test_counts([5, 5], 0.2) == [1, 1]
    assert sum(allocate_test_counts([3, 3, 3], 0.5)) == 5


def test_split_is_seeded():
    y = np.array([0] * 40 + [1] * 10)
    a = stratified_split(y, 0.3, 5)
    b = stratified_split(y, 0.3, 5)
    c = stratified_split(y, 0.3, 6)
    np.testing.assert_array_equal(a.test_indices, b.test_indices)
    assert not np.array_equal(a.test_indices, c.test_indices)


def test_split_errors():
    with pytest.raises(ValueError, match="both classes"):
        stratified_split(np.zeros(10), 0.2, 0)
    with pytest.raises(ValueError):
        stratified_split(np.array([0, 1] * 5), 1.0, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.sampled_from([0.1, 0.2, 0.25, 0.3, 0.5]),
       st.integers(0, 2**32))
def test_split_preserves_class_shares(n0, n1, f, seed):
    y = np.array([0] * n0 + [1] * n1)
    plan = stratified_split(y, f, seed)
    assert len(plan.test_indices) == math.ceil((n0 + n1) * Fraction(str(f)))
    for cls, n in ((0, n0), (1, n1)):
        got = int(np.sum(y[plan.test_indices] == cls))
        assert abs(got - n * f) < 1 + 1e-9


def test_kfold_sizes_for_training_split():
    y = np.array([1] * 538 + [0] * 2999)  # 3537 training rows
    folds = kfold(y, 5, seed=0)
    assert sorted(len(f) for f in folds) == [707, 707, 707, 708, 708]
    assert sorted(np.concatenate(folds).tolist()) == list(range(3537))
    for f in folds:
        assert abs(int(y[f].sum()) - 538 / 5) < 1 + 1e-9


def test_kfold_errors_and_pairs():
    with pytest.raises(ValueError, match="smaller than k"):
        kfold([0] * 10 + [1] * 3, 5, 0)
    with pytest.raises(ValueError):
        kfold([0, 1] * 5, 1, 0)
    y = np.array([0] * 20 + [1] * 10)
    for train, val in fold_pairs(y, 3, 1):
        assert set(train).isdisjoint(val) and len(train) + len(val) == 30


def test_mcnemar_matches_oracle_for_all_small_tables():
    for n in range(0, 51):
        for b in range(n + 1):
            c = n - b
            got = exact_binomial_two_sided(b, c)
            want = float(binomial_tail_oracle(b, c))
            assert abs(got - want) <= 1e-12, (b, c)
            if b == c:
                assert got == 1.0


def test_mcnemar_counts_and_symmetry():
    y = np.array([1, 1, 0, 0, 1, 0, 1, 0])
    a = np.array([1, 0, 0, 0, 1, 1, 1, 0])  # wrong on rows 1, 5
    b = np.array([0, 0, 1, 1, 1, 0, 1, 0])  # wrong on rows 0, 1, 2, 3
    r = mcnemar(y, a, b)
    assert (r.b, r.c) == (3, 1)
    assert mcnemar(y, b, a).p_value == r.p_value
    assert r.p_value == float(binomial_tail_oracle(3, 1))
    same = mcnemar(y, a, a)
    assert same.degenerate and same.p_value == 1.0


def test_mcnemar_chi_square_close_to_exact_for_large_counts():
    r = mcnemar(np.zeros(300), np.r_[np.ones(100), np.zeros(200)], np.r_[np.zeros(60), np.ones(140), np.zeros(100)])
    assert (r.b, r.c) == (100, 60)
    assert r.p_value < 0.01 and r.p_value_chi2 < 0.01
    assert r.p_value == pytest.approx(r.p_value_chi2, rel=0.2)
