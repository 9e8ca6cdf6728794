"""Grid search with stratified k-fold CV on AUC, and recursive feature elimination."""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import trees
from .evaluation import fold_pairs, roc_auc
from .features import FeatureMatrix
from .trees import Kind, TrainConfig, TreeEnsemble, split_count_importance

log = logging.getLogger(__name__)

# hyper-parameters each model family actually uses
KIND_PARAMS = {
    Kind.GBDT: ("n_estimators", "max_depth", "learning_rate", "colsample", "reg_alpha", "reg_lambda"),
    Kind.RANDOM_FOREST: ("n_estimators", "max_depth", "colsample"),
    Kind.DECISION_TREE: ("max_depth",),
}
SHARED_PARAMS = ("min_samples_leaf", "n_bins")
GRID_PARAMS = KIND_PARAMS[Kind.GBDT] + SHARED_PARAMS


@dataclass(frozen=True)
class GridSpec:
    """Value lists per hyper-parameter plus the model families to sweep.

    A parameter a family does not use is left at its TrainConfig default for
    that family, so families never produce duplicate candidates.
    """

    kinds: tuple[str, ...] = (Kind.GBDT,)
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.kinds:
            raise ValueError("grid needs at least one model kind")
        for k in self.kinds:
            if k not in Kind.ALL:
                raise ValueError(f"unknown model kind {k!r}")
        for name, vals in self.values.items():
            if name not in GRID_PARAMS:
                raise ValueError(f"unknown grid parameter {name!r}")
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                raise ValueError(f"grid parameter {name!r} needs a non-empty list")

    def candidates(self, seed: int = 0) -> list[TrainConfig]:
        out = []
        for kind in self.kinds:
            names = [n for n in KIND_PARAMS[kind] + SHARED_PARAMS if n in self.values]
            for combo in itertools.product(*(self.values[n] for n in names)):
                out.append(TrainConfig(model_kind=kind, seed=seed, **dict(zip(names, combo))))
        return out

    def to_dict(self) -> dict:
        return {"kinds": list(self.kinds), **{k: list(v) for k, v in self.values.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        d = dict(d)
        kinds = tuple(d.pop("kinds", (Kind.GBDT,)))
        return cls(kinds, {k: tuple(v) for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "GridSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


DEFAULT_GRID = GridSpec(
    kinds=(Kind.GBDT,),
    values={
        "n_estimators": (50, 80, 100, 120),
        "max_depth": (5, 10, 15, 20),
        "learning_rate": (0.05, 0.1),
        "colsample": (0.5, 0.8, 1.0),
        "reg_alpha": (0.0, 0.1, 0.2),
        "reg_lambda": (1.0, 10.0),
    },
)


def candidate_seed(master_seed: int, index: int) -> int:
    """Per-candidate seed, a fixed function of (master seed, enumeration index)."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


@dataclass
class CandidateResult:
    index: int
    config: TrainConfig
    fold_aucs: list[float]
    mean_auc: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "config": self.config.to_dict(),
            "fold_aucs": self.fold_aucs,
            "mean_auc": self.mean_auc,
            "failed": self.failed,
            "error": self.error,
        }


@dataclass
class SearchResult:
    best_config: TrainConfig
    mean_cv_auc: float
    candidates: list[CandidateResult]
    model: TreeEnsemble  # best config refit on the whole matrix

    def best_per_kind(self) -> dict[str, CandidateResult]:
        best: dict[str, CandidateResult] = {}
        for c in self.candidates:
            if c.failed:
                continue
            cur = best.get(c.config.model_kind)
            if cur is None or c.mean_auc > cur.mean_auc:
                best[c.config.model_kind] = c
        return best

    def to_dict(self) -> dict:
        return {
            "best_config": self.best_config.to_dict(),
            "mean_cv_auc": self.mean_cv_auc,
            "candidates": [c.to_dict() for c in self.candidates],
        }


# worker state, installed once per process
_STATE: dict = {}


def _install(X, y, names, folds):
    _STATE.update(X=X, y=y, names=names, folds=folds)


def _fold_auc(task) -> tuple[float | None, str | None]:
    cfg, fold = task
    X, y, names = _STATE["X"], _STATE["y"], _STATE["names"]
    train, val = _STATE["folds"][fold]
    try:
        m = FeatureMatrix(X[train], y[train], [""] * len(train), names)
        model = trees.fit(m, cfg)
        return roc_auc(y[val], model.predict_proba(X[val])), None
    except Exception as exc:  # a failing candidate is recorded, not fatal
        return None, f"{type(exc).__name__}: {exc}"


def _run_tasks(tasks, X, y, names, folds, jobs: int):
    if jobs <= 1:
        _install(X, y, names, folds)
        try:
            return [_fold_auc(t) for t in tasks]
        finally:
            _STATE.clear()
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_install, initargs=(X, y, names, folds)
    ) as pool:
        return list(pool.map(_fold_auc, tasks, chunksize=1))


def grid_search_cv(
    matrix: FeatureMatrix, grid: GridSpec, k: int = 5, seed: int = 0, jobs: int = 1
) -> SearchResult:
    """Pick the candidate with the highest mean validation AUC over k folds.

    Folds depend only on ``seed``; each candidate trains with
    :func:`candidate_seed`. The argmax runs in enumeration order (first
    candidate wins ties) and the winner is refit on the full matrix.
    """
    if len(set(matrix.y.tolist())) < 2:
        raise ValueError("degenerate labels: grid search needs both classes")
    configs = [
        cfg.replace(seed=candidate_seed(seed, i)) for i, cfg in enumerate(grid.candidates())
    ]
    if not configs:
        raise ValueError("empty grid")
    folds = fold_pairs(matrix.y, k, seed)
    tasks = [(cfg, f) for cfg in configs for f in range(k)]
    outcomes = _run_tasks(tasks, matrix.X, matrix.y, matrix.feature_names, folds, jobs)

    results = []
    for i, cfg in enumerate(configs):
        got = outcomes[i * k:(i + 1) * k]
        errors = [e for _, e in got if e is not None]
        if errors:
            results.append(CandidateResult(i, cfg, [], float("nan"), errors[0]))
            continue
        aucs = [a for a, _ in got]
        results.append(CandidateResult(i, cfg, aucs, float(np.mean(aucs))))

    ok = [r for r in results if not r.failed]
    if not ok:
        raise RuntimeError(f"all {len(results)} candidates failed; first error: {results[0].error}")
    best = ok[0]
    for r in ok[1:]:
        if r.mean_auc > best.mean_auc:
            best = r
    log.info("best candidate %d mean AUC %.4f", best.index, best.mean_auc)
    return SearchResult(best.config, best.mean_auc, results, trees.fit(matrix, best.config))


@dataclass
class RfeStep:
    features: tuple[str, ...]
    best_config: TrainConfig
    mean_cv_auc: float
    removed: str | None
    importance: list[tuple[str, int]]

    def to_dict(self) -> dict:
        return {
            "n_features": len(self.features),
            "features": list(self.features),
            "best_config": self.best_config.to_dict(),
            "mean_cv_auc": self.mean_cv_auc,
            "removed": self.removed,
            "split_counts": [[n, c] for n, c in self.importance],
        }


@dataclass
class RfeTrace:
    steps: list[RfeStep]

    @property
    def winner(self) -> RfeStep:
        best = self.steps[0]
        for s in self.steps[1:]:
            if s.mean_cv_auc > best.mean_cv_auc:
                best = s
        return best

    @property
    def removal_order(self) -> list[str]:
        return [s.removed for s in self.steps if s.removed is not None]

    def to_dict(self) -> dict:
        w = self.winner
        return {
            "steps": [s.to_dict() for s in self.steps],
            "removal_order": self.removal_order,
            "winner": {"n_features": len(w.features), "features": list(w.features),
                       "mean_cv_auc": w.mean_cv_auc, "best_config": w.best_config.to_dict()},
        }


def least_important(importance: Sequence[tuple[str, int]], catalog: Sequence[str]) -> str:
    """Feature with the fewest splits; ties go to the later catalog position."""
    counts = dict(importance)
    return max(catalog, key=lambda f: (-counts[f], catalog.index(f)))


def recursive_feature_elimination(
    matrix: FeatureMatrix, grid: GridSpec, k: int = 5, seed: int = 0, floor: int = 13,
    jobs: int = 1,
) -> RfeTrace:
    """Grid-search, drop the least-split feature of the winner, repeat down to ``floor``.

    The step with the highest mean CV AUC is the winner (earliest step on ties).
    """
    if floor < 1:
        raise ValueError("floor must be >= 1")
    if floor > matrix.n_features:
        raise ValueError(f"floor {floor} exceeds the {matrix.n_features} available features")
    active = list(matrix.feature_names)
    steps = []
    while True:
        result = grid_search_cv(matrix.select(active), grid, k, seed, jobs)
        importance = split_count_importance(result.model)
        removed = least_important(importance, active) if len(active) > floor else None
        steps.append(RfeStep(tuple(active), result.best_config, result.mean_cv_auc, removed, importance))
        log.info("RFE %d features: mean AUC %.4f, removing %s", len(active), result.mean_cv_auc, removed)
        if removed is None:
            break
        active.remove(removed)
    return RfeTrace(steps)
