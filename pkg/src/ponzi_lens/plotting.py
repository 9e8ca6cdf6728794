"""PNG renderings of the report tables.

Everything draws on standalone ``Figure`` objects (Agg canvas), so nothing
touches pyplot's global state and output bytes depend only on the data.
"""

from __future__ import annotations

import functools
import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

from .evaluation import ConfusionMatrix
from .explain import DependenceTable, ShapSummary
from .features import DistributionTable

CLASS_NAMES = {0: "Not Ponzi", 1: "Ponzi"}
CLASS_COLORS = {0: "#1f77b4", 1: "#d62728"}

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def _styled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with mpl.rc_context(STYLE):
            return fn(*args, **kwargs)
    return wrapper


def _figure(width: float, height: float) -> Figure:
    return Figure(figsize=(width, height), dpi=100, layout="constrained")


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date metadata, so reruns write identical bytes
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def _grid(n: int, ncols: int = 4):
    ncols = max(1, min(ncols, n))
    return math.ceil(n / ncols), ncols


@_styled
def plot_distributions(tables: Sequence[DistributionTable], path) -> Path:
    """Per-class CDFs (continuous features) or 0/1 percentage bars (flags)."""
    nrows, ncols = _grid(len(tables))
    fig = _figure(3.0 * ncols, 2.3 * nrows)
    axes = fig.subplots(nrows, ncols, squeeze=False).ravel()
    for ax, t in zip(axes, tables):
        rows = np.array(t.rows, dtype=np.float64).reshape(-1, 3)
        for k, cls in enumerate((0, 1)):
            sel = rows[rows[:, 0] == cls]
            if not len(sel):
                continue
            if t.kind == "share":
                ax.bar(sel[:, 1] + (k - 0.5) * 0.35, sel[:, 2], width=0.35,
                       color=CLASS_COLORS[cls], label=CLASS_NAMES[cls])
            else:
                ax.step(sel[:, 1], sel[:, 2], where="post",
                        color=CLASS_COLORS[cls], label=CLASS_NAMES[cls])
        ax.set_title(t.feature)
        if t.kind == "share":
            ax.set_xticks([0, 1])
            ax.set_ylabel("% of class")
        else:
            ax.set_ylim(0, 1.02)
    for ax in axes[len(tables):]:
        ax.set_visible(False)
    if tables:
        axes[0].legend(loc="lower right")
    return _save(fig, path)


@_styled
def plot_roc(curves: Mapping[str, Sequence[tuple[float, float, float]]], path) -> Path:
    """One ROC curve per named classifier; points are (threshold, fpr, tpr)."""
    fig = _figure(4.0, 4.0)
    ax = fig.subplots()
    ax.plot([0, 1], [0, 1], ls=":", c="grey", lw=0.8)
    for name, pts in curves.items():
        pts = np.array(pts, dtype=np.float64)
        ax.plot(pts[:, 1], pts[:, 2], label=name)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.legend(loc="lower right")
    return _save(fig, path)


@_styled
def plot_confusion(cm: ConfusionMatrix, path, title: str = "") -> Path:
    fig = _figure(3.2, 3.0)
    ax = fig.subplots()
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]])
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center",
                color="white" if v > grid.max() / 2 else "black")
    ax.set_xticks([0, 1], ["Not Ponzi", "Ponzi"])
    ax.set_yticks([0, 1], ["Not Ponzi", "Ponzi"])
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    if title:
        ax.set_title(title)
    return _save(fig, path)


@_styled
def plot_split_importance(importance: Sequence[tuple[str, int]], path, highlight=()) -> Path:
    """Horizontal bars of split counts, most used on top."""
    names = [n for n, _ in importance]
    counts = [c for _, c in importance]
    fig = _figure(5.0, 0.6 + 0.22 * len(names))
    ax = fig.subplots()
    colors = ["#d62728" if n in highlight else "#1f77b4" for n in names]
    ax.barh(range(len(names)), counts, color=colors)
    ax.set_yticks(range(len(names)), names)
    ax.invert_yaxis()
    ax.set_xlabel("Number of splits")
    return _save(fig, path)


@_styled
def plot_probability_histogram(labels, probabilities, path, threshold: float = 0.5) -> Path:
    y = np.asarray(labels)
    p = np.asarray(probabilities, dtype=np.float64)
    fig = _figure(4.5, 3.0)
    ax = fig.subplots()
    bins = np.linspace(0, 1, 21)
    for cls in (0, 1):
        if np.any(y == cls):
            ax.hist(p[y == cls], bins=bins, alpha=0.6, color=CLASS_COLORS[cls], label=CLASS_NAMES[cls])
    ax.axvline(threshold, c="k", ls="--", lw=0.8)
    ax.set_xlabel("Predicted Ponzi probability")
    ax.set_ylabel("Contracts")
    ax.legend()
    return _save(fig, path)


def _swarm_offsets(values: np.ndarray, n_bins: int = 40, width: float = 0.4) -> np.ndarray:
    """Deterministic vertical spread: points sharing a bin fan out symmetrically."""
    if len(values) == 0:
        return values
    lo, hi = values.min(), values.max()
    span = hi - lo if hi > lo else 1.0
    bins = np.minimum(((values - lo) / span * n_bins).astype(int), n_bins - 1)
    offsets = np.zeros(len(values))
    counts = np.bincount(bins, minlength=n_bins)
    scale = width / max(1, counts.max())
    seen = np.zeros(n_bins, dtype=int)
    for i in np.argsort(values, kind="mergesort"):
        k = seen[bins[i]]
        seen[bins[i]] += 1
        offsets[i] = (k + 1) // 2 * scale * (1 if k % 2 else -1)
    return offsets


@_styled
def plot_beeswarm(summary: ShapSummary, path, top_k: int = 10) -> Path:
    """Attribution per sample for the top features, colored by feature value rank."""
    top = [name for name, _ in summary.ranking[:top_k]]
    by_feature: dict[str, list[tuple[float, float]]] = {n: [] for n in top}
    for name, _, phi, value in summary.beeswarm:
        if name in by_feature:
            by_feature[name].append((phi, value))
    fig = _figure(5.5, 0.8 + 0.4 * len(top))
    ax = fig.subplots()
    sc = None
    for pos, name in enumerate(top):
        pts = np.array(by_feature[name], dtype=np.float64).reshape(-1, 2)
        if not len(pts):
            continue
        # color by within-feature rank so heavy tails do not wash out the scale
        ranks = np.argsort(np.argsort(pts[:, 1], kind="mergesort"), kind="mergesort")
        color = ranks / max(1, len(pts) - 1)
        sc = ax.scatter(pts[:, 0], pos + _swarm_offsets(pts[:, 0]), c=color, cmap="coolwarm",
                        vmin=0, vmax=1, s=6, linewidths=0)
    ax.axvline(0, c="grey", lw=0.8)
    ax.set_yticks(range(len(top)), top)
    ax.invert_yaxis()
    ax.set_xlabel("SHAP value (log-odds)")
    if sc is not None:
        bar = fig.colorbar(sc, ax=ax, ticks=[0, 1])
        bar.ax.set_yticklabels(["low", "high"])
        bar.set_label("Feature value")
    return _save(fig, path)


@_styled
def plot_dependence(table: DependenceTable, path) -> Path:
    pts = np.array(table.rows, dtype=np.float64).reshape(-1, 3)
    fig = _figure(4.0, 3.2)
    ax = fig.subplots()
    if len(pts):
        ranks = np.argsort(np.argsort(pts[:, 2], kind="mergesort"), kind="mergesort")
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=ranks / max(1, len(pts) - 1), cmap="coolwarm",
                        vmin=0, vmax=1, s=8, linewidths=0)
        bar = fig.colorbar(sc, ax=ax, ticks=[0, 1])
        bar.ax.set_yticklabels(["low", "high"])
        bar.set_label(table.interaction)
    ax.axhline(0, c="grey", lw=0.8)
    ax.set_xlabel(table.feature)
    ax.set_ylabel(f"SHAP value for {table.feature}")
    return _save(fig, path)


@_styled
def plot_rfe(steps: Sequence[tuple[int, float]], path, winner: int | None = None) -> Path:
    """Mean CV AUC against the number of retained features."""
    pts = np.array(steps, dtype=np.float64).reshape(-1, 2)
    fig = _figure(4.5, 3.0)
    ax = fig.subplots()
    ax.plot(pts[:, 0], pts[:, 1], marker="o", ms=3)
    if winner is not None:
        at = pts[pts[:, 0] == winner]
        ax.plot(at[:, 0], at[:, 1], marker="*", ms=12, c="#d62728", ls="none", label="selected")
        ax.legend()
    ax.invert_xaxis()
    ax.set_xlabel("Number of features")
    ax.set_ylabel("Mean CV AUC")
    return _save(fig, path)
