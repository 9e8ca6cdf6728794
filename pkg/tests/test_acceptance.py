"""Acceptance criteria, one test each, each printing a PASS/FAIL/SKIP line.

Run with ``pytest tests/test_acceptance.py -v -s``. Criteria 3 and 11 need
the released contract dataset: point ``PONZI_LENS_DATA`` at a directory
holding ``transactions.csv`` and ``labels.csv`` to enable them.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import DATA, history_from_tuples, make_informative_noise, make_separable
from oracles.fixtures import FIXTURES
from oracles.stat_oracles import PUBLISHED, binomial_tail_oracle, pairwise_auc
from ponzi_lens import cli
from ponzi_lens.chain_data import ContractHistory, Direction, Transaction
from ponzi_lens.evaluation import ConfusionMatrix, exact_binomial_two_sided, metrics, roc_auc, stratified_split
from ponzi_lens.explain import brute_force_shapley, tree_shap
from ponzi_lens.features import FEATURES, INITIATOR_FLAGS, NEW_FEATURES, FeatureMatrix, extract_features, write_features_csv
from ponzi_lens.selection import GridSpec, recursive_feature_elimination
from ponzi_lens.trees import Kind, TrainConfig, fit_decision_tree, fit_gbdt, fit_random_forest, load_model

DATASET = os.environ.get("PONZI_LENS_DATA")
NO_DATASET = "released contract dataset not available (set PONZI_LENS_DATA)"


def _dataset_dir():
    if not DATASET:
        return None
    d = Path(DATASET)
    if (d / "transactions.csv").is_file() and (d / "labels.csv").is_file():
        return d
    return None


def _matrix(X, y, names):
    return FeatureMatrix(X, y, [f"r{i:04d}" for i in range(len(y))], tuple(names))


def test_01_metric_arithmetic(criterion):
    with criterion(1, "metric arithmetic reproduces published table rows") as c:
        t0 = time.perf_counter()
        for name, (cm, want) in PUBLISHED.items():
            r = metrics(ConfusionMatrix(*cm)).rounded(3)
            assert (r["accuracy"], r["precision"], r["recall"], r["f1"]) == want, name
        assert time.perf_counter() - t0 < 1
        c.detail = "d1, d2, d3 exact at 3 decimals"


def test_02_stratification(criterion):
    with criterion(2, "stratified split of 4422 rows gives 885 test rows, 135 positive") as c:
        t0 = time.perf_counter()
        y = np.r_[np.ones(673, int), np.zeros(3749, int)]
        plan = stratified_split(y, 0.2, seed=0)
        assert len(plan.test_indices) == 885
        assert int(y[plan.test_indices].sum()) == 135
        assert time.perf_counter() - t0 < 1
        c.detail = f"test={len(plan.test_indices)} positives={int(y[plan.test_indices].sum())}"


def _cli_or_fail(argv):
    code = cli.main(argv)
    assert code == 0, f"{argv[0]} exited {code}"


def test_03_end_to_end_reproduction(criterion, tmp_path):
    with criterion(3, "end-to-end reproduction on the released dataset") as c:
        data = _dataset_dir()
        if data is None:
            c.skip(NO_DATASET + "; replaced by criterion 8")
        t0 = time.perf_counter()
        _cli_or_fail(["featurize", "--transactions", str(data / "transactions.csv"),
                      "--labels", str(data / "labels.csv"), "--out", str(tmp_path / "feat"), "--no-figures"])
        feats = str(tmp_path / "feat/features.csv")
        reports = {}
        for variant in ("d3", "d2"):
            _cli_or_fail(["train", "--features", feats, "--variant", variant, "--seed", "0",
                          "--no-figures", "--out", str(tmp_path / variant)])
            reports[variant] = json.loads((tmp_path / variant / "report.json").read_text())["metrics"]
        elapsed = time.perf_counter() - t0
        d3, d2 = reports["d3"], reports["d2"]
        c.detail = f"d3 auc={d3['auc']:.3f} acc={d3['accuracy']:.3f}, d2 auc={d2['auc']:.3f}, {elapsed:.0f}s"
        assert d3["auc"] >= 0.85 and d3["accuracy"] >= 0.88
        assert d3["auc"] > d2["auc"]
        assert elapsed < 600


def test_04_shap_local_accuracy(criterion):
    with criterion(4, "SHAP local accuracy on 1000 rows") as c:
        rng = np.random.default_rng(2)
        X = rng.lognormal(size=(900, 12))
        y = ((np.log(X[:, 0]) + np.log(X[:, 1]) * np.log(X[:, 2]) + rng.normal(size=900)) > 0).astype(int)
        names = FEATURES[:12]
        models = {
            "gbdt": fit_gbdt(X, y, TrainConfig(n_estimators=100, max_depth=10, colsample=0.8,
                                               reg_alpha=0.1, reg_lambda=1.0, seed=1), names),
            "random_forest": fit_random_forest(X, y, TrainConfig(n_estimators=50, max_depth=8, seed=1), names),
            "decision_tree": fit_decision_tree(X, y, TrainConfig(max_depth=12), names),
        }
        rows = rng.lognormal(size=(1000, 12))
        t0 = time.perf_counter()
        worst = 0.0
        for m in models.values():
            sm = tree_shap(m, rows)
            worst = max(worst, float(np.abs(sm.base_value + sm.phi.sum(axis=1) - m.predict_margin(rows)).max()))
        elapsed = time.perf_counter() - t0
        c.detail = f"max error {worst:.2e}, {elapsed:.1f}s for 3 models"
        assert worst <= 1e-8
        assert elapsed < 30


def test_05_shap_brute_force_equivalence(criterion):
    with criterion(5, "TreeSHAP equals brute-force Shapley on 20 random ensembles") as c:
        rng = np.random.default_rng(5)
        t0 = time.perf_counter()
        worst = 0.0
        for i in range(20):
            F = int(rng.integers(2, 7))
            X = rng.normal(size=(120, F))
            y = (X[:, 0] + X[:, 1] * X[:, -1] + rng.normal(scale=0.5, size=120) > 0).astype(int)
            cfg = TrainConfig(n_estimators=int(rng.integers(1, 6)), max_depth=int(rng.integers(1, 4)),
                              colsample=float(rng.choice([0.6, 1.0])), learning_rate=0.3, seed=i)
            fitter = fit_gbdt if i % 2 == 0 else fit_random_forest
            m = fitter(X, y, cfg, FEATURES[:F])
            assert len(m.trees) <= 5 and all(t.max_depth() <= 3 for t in m.trees)
            rows = rng.normal(size=(4, F))
            sm = tree_shap(m, rows)
            for r in range(len(rows)):
                worst = max(worst, float(np.abs(sm.phi[r] - brute_force_shapley(m, rows[r])).max()))
        elapsed = time.perf_counter() - t0
        c.detail = f"max deviation {worst:.2e}, {elapsed:.1f}s"
        assert worst <= 1e-8
        assert elapsed < 60


def test_06_auc_oracle(criterion):
    with criterion(6, "rank AUC equals the pairwise oracle on 200 vectors") as c:
        rng = np.random.default_rng(6)
        t0 = time.perf_counter()
        worst, heavy = 0.0, 0
        for trial in range(200):
            n = int(rng.integers(2, 120))
            y = rng.integers(0, 2, size=n)
            y[0], y[1] = 0, 1
            if trial % 2:
                s = rng.integers(0, 3, size=n).astype(float)  # at most 3 distinct scores
            else:
                s = rng.random(n)
            if n - len(np.unique(s)) >= n / 2:
                heavy += 1
            worst = max(worst, abs(roc_auc(y, s) - float(pairwise_auc(y, s))))
        elapsed = time.perf_counter() - t0
        c.detail = f"max deviation {worst:.1e}, {heavy} heavy-tie vectors"
        assert worst <= 1e-12
        assert heavy >= 50
        assert elapsed < 30


def test_07_mcnemar_oracle(criterion):
    with criterion(7, "exact McNemar equals binomial-tail summation for b+c <= 50") as c:
        worst, cases = 0.0, 0
        for n in range(51):
            for b in range(n + 1):
                got = exact_binomial_two_sided(b, n - b)
                worst = max(worst, abs(got - float(binomial_tail_oracle(b, n - b))))
                if b == n - b:
                    assert got == 1.0
                cases += 1
        c.detail = f"{cases} tables, max deviation {worst:.1e}"
        assert worst <= 1e-12


def test_08_learnability(criterion):
    with criterion(8, "separable set reaches training AUC 1.0; RFE drops noise first") as c:
        t0 = time.perf_counter()
        X, y = make_separable(500, seed=8)
        m = fit_gbdt(X, y, TrainConfig(n_estimators=50, max_depth=3), FEATURES[:X.shape[1]])
        train_auc = roc_auc(y, m.predict_proba(X))
        assert train_auc == 1.0

        X, y = make_informative_noise(600, seed=8)
        names = FEATURES[:8]
        grid = GridSpec((Kind.GBDT,), {"n_estimators": (30,), "max_depth": (3,)})
        trace = recursive_feature_elimination(_matrix(X, y, names), grid, k=5, seed=0, floor=3)
        order = trace.removal_order
        elapsed = time.perf_counter() - t0
        c.detail = f"train auc {train_auc}, removal order {order}, {elapsed:.1f}s"
        assert set(order) == set(names[3:]), "an informative feature was removed before the noise"
        assert elapsed < 60


def _random_history(rng, contract, creator, parties):
    rows = sorted((
        (int(rng.integers(0, 5 * 86400)), parties[int(rng.integers(len(parties)))],
         Direction.IN if rng.random() < 0.5 else Direction.OUT,
         0 if rng.random() < 0.3 else int(rng.integers(1, 10**6)))
        for _ in range(int(rng.integers(0, 8)))
    ), key=lambda t: t[0])
    return ContractHistory(contract, creator, tuple(Transaction(*r) for r in rows))


def test_09_feature_oracle(criterion):
    with criterion(9, "crafted fixtures match the oracle; initiator flags partition") as c:
        frozen = json.loads((DATA / "feature_oracle.json").read_text())
        worst = 0.0
        for name, spec in FIXTURES.items():
            got = extract_features(history_from_tuples(*spec))
            assert list(got) == list(FEATURES)
            for f in FEATURES:
                want = frozen[name][f]
                assert abs(got[f] - want) <= 1e-9 * max(1.0, abs(want)), (name, f)
                worst = max(worst, abs(got[f] - want))
        rng = np.random.default_rng(9)
        creator = "0x" + "6" * 40
        parties = [creator] + ["0x" + ch * 40 for ch in "abde"]
        for _ in range(10_000):
            f = extract_features(_random_history(rng, "0x" + "c" * 40, creator, parties))
            assert sum(f[k] for k in INITIATOR_FLAGS) == 1
        c.detail = f"{len(FIXTURES)} fixtures x {len(FEATURES)} features, 10000 histories"


def _run_outputs(out: Path) -> dict[str, bytes]:
    # timing.json carries wall clock and job count by design
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != "timing.json"}


def test_10_determinism_across_jobs(criterion, tmp_path):
    with criterion(10, "train and rfe outputs are byte-identical under --jobs 1 and --jobs 8") as c:
        X, y = make_separable(500, seed=8)
        write_features_csv(tmp_path / "separable.csv", _matrix(X, y, FEATURES[:X.shape[1]]))
        X, y = make_informative_noise(600, seed=8)
        write_features_csv(tmp_path / "noise.csv", _matrix(X, y, FEATURES[:8]))
        (tmp_path / "grid.json").write_text(json.dumps(
            {"kinds": ["gbdt", "random_forest"], "n_estimators": [30, 50], "max_depth": [3]}))
        runs = {
            "train": ["train", "--features", str(tmp_path / "separable.csv")],
            "rfe": ["rfe", "--features", str(tmp_path / "noise.csv"), "--floor", "3"],
        }
        compared = 0
        for name, argv in runs.items():
            outs = []
            for jobs in (1, 8):
                out = tmp_path / f"{name}_{jobs}"
                _cli_or_fail(argv + ["--grid", str(tmp_path / "grid.json"), "--seed", "11",
                                     "--jobs", str(jobs), "--out", str(out)])
                outs.append(_run_outputs(out))
            assert outs[0].keys() == outs[1].keys()
            for key in outs[0]:
                assert outs[0][key] == outs[1][key], f"{name}: {key} differs"
            compared += len(outs[0])
        c.detail = f"{compared} files compared"
        if _dataset_dir() is None:
            c.detail += "; criterion 3 runs skipped, no dataset"


def test_11_qualitative_targets(criterion, tmp_path, capsys):
    with criterion(11, "qualitative targets on the released dataset (report only)") as c:
        data = _dataset_dir()
        if data is None:
            c.skip(NO_DATASET)
        _cli_or_fail(["featurize", "--transactions", str(data / "transactions.csv"),
                      "--labels", str(data / "labels.csv"), "--out", str(tmp_path / "feat"), "--no-figures"])
        feats = str(tmp_path / "feat/features.csv")
        for variant in ("d1", "d2", "d3"):
            _cli_or_fail(["train", "--features", feats, "--variant", variant, "--no-figures",
                          "--out", str(tmp_path / variant)])
        d1 = load_model(tmp_path / "d1/model.json")
        counts = dict(zip(d1.feature_names, d1.split_counts))
        new_rank = sorted(NEW_FEATURES, key=lambda f: (-counts[f], NEW_FEATURES.index(f)))
        _cli_or_fail(["explain", "--model", str(tmp_path / "d3/model.json"), "--features", feats,
                      "--no-figures", "--out", str(tmp_path / "shap")])
        top3 = json.loads((tmp_path / "shap/manifest.json").read_text())["top_features"][:3]
        _cli_or_fail(["compare", "--features", feats, "--model-a", str(tmp_path / "d1/model.json"),
                      "--model-b", str(tmp_path / "d2/model.json"), "--no-figures",
                      "--out", str(tmp_path / "cmp")])
        p = json.loads((tmp_path / "cmp/mcnemar.json").read_text())["p_value"]
        hits = {
            "sdev_tx_in first among new features": new_rank[0] == "sdev_tx_in",
            "shap top 3 contains tx_in, investment_in/tx_in, lifetime":
                {"tx_in", "inv_in_over_tx_in", "lifetime"} <= set(top3),
            "mcnemar d1 vs d2 p < 0.05": p < 0.05,
        }
        # report only: these targets are data dependent and never block
        c.detail = "; ".join(f"{k}: {'yes' if v else 'no'}" for k, v in hits.items())
