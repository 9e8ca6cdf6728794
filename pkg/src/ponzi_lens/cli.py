"""Command-line driver: featurize, train, rfe, explain, compare.

Every command is a pure function of its input files, flags and seed. Each
output directory gets a ``manifest.json`` describing exactly what produced
it; wall-clock timing goes to ``timing.json`` so the manifest stays
byte-stable across reruns. ``--jobs`` only changes how fast results arrive.

Exit codes: 0 success, 1 input or runtime error, 2 usage error, 3 a
contract check (SHAP local accuracy) failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, trees
from .chain_data import ParseError, load_dataset
from .evaluation import ConfusionMatrix, evaluate, mcnemar, roc_points, stratified_split
from .explain import (
    check_local_accuracy, dependence_data, pick_interaction, shap_summary, tree_shap,
)
from .features import (
    FEATURES, INITIATOR_FLAGS, NEW_FEATURES, FeatureCatalog, FeatureMatrix,
    build_feature_matrix, emit_distribution_data, read_features_csv,
    write_distribution_csv, write_features_csv,
)
from .selection import DEFAULT_GRID, GridSpec, grid_search_cv, recursive_feature_elimination
from .trees import ConfigError, load_model, save_model, split_count_importance

log = logging.getLogger("ponzi_lens")

SEED_ENV = "PONZI_LENS_SEED"
EXIT_ERROR = 1
EXIT_CONTRACT = 3


class ContractViolation(RuntimeError):
    pass


# --- output helpers --------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Collects outputs of one command and writes its manifest at the end."""

    def __init__(self, command: str, args: argparse.Namespace, inputs: dict):
        self.command = command
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {k: v for k, v in inputs.items() if v is not None}
        self.outputs: list[str] = []
        self.started = time.perf_counter()

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return p

    @property
    def figures(self) -> bool:
        return not self.args.no_figures

    def finish(self, extra: dict | None = None) -> None:
        echo = {
            k: v for k, v in sorted(vars(self.args).items())
            if k not in ("func", "out", "jobs", "verbose", "no_figures") and v is not None
        }
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "seed": getattr(self.args, "seed", None),
            "variant": getattr(self.args, "variant", None),
            "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in self.inputs.items()},
            "config": echo,
            "outputs": sorted(self.outputs),
            **(extra or {}),
        }
        write_json(self.out / "manifest.json", manifest)
        write_json(self.out / "timing.json", {
            "command": self.command,
            "wall_clock_seconds": time.perf_counter() - self.started,
            "jobs": getattr(self.args, "jobs", 1),
        })


# --- shared steps ----------------------------------------------------------------


def _catalog_for(matrix: FeatureMatrix, variant: str | None) -> FeatureMatrix:
    if variant is None:
        return matrix
    return matrix.project(FeatureCatalog.named(variant))


def _load_grid(path) -> GridSpec:
    return DEFAULT_GRID if path is None else GridSpec.load(path)


def _split(matrix: FeatureMatrix, args) -> tuple[FeatureMatrix, FeatureMatrix]:
    plan = stratified_split(matrix.y, args.test_fraction, args.seed)
    return matrix.take(plan.train_indices), matrix.take(plan.test_indices)


def _test_report(model, test: FeatureMatrix, threshold: float) -> dict:
    p = trees.predict_proba(model, test)
    cm, rep = evaluate(test.y, p, threshold)
    return {
        "metrics": rep.to_dict(),
        "metrics_rounded": rep.rounded(3),
        "confusion": cm.to_dict(),
        "roc_points": [list(pt) for pt in roc_points(test.y, p)],
    }, p


def _write_predictions(path: Path, test: FeatureMatrix, p: np.ndarray, threshold: float) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("address,label,probability,predicted\n")
        for addr, y, prob in zip(test.addresses, test.y, p):
            fh.write(f"{addr},{int(y)},{_fmt(prob)},{int(prob >= threshold)}\n")


def _evaluate_winner(run: Run, search, train, test, args, name: str) -> dict:
    """Per-family test report for the winner of each family in the search."""
    per_classifier = {}
    curves = {}
    for kind, cand in sorted(search.best_per_kind().items()):
        model = search.model if cand.config == search.best_config else trees.fit(train, cand.config)
        rep, p = _test_report(model, test, args.threshold)
        per_classifier[kind] = {"config": cand.config.to_dict(), "mean_cv_auc": cand.mean_auc, **rep}
        curves[kind] = rep["roc_points"]
    best, p = _test_report(search.model, test, args.threshold)
    report = {
        "dataset_variant": name,
        "n_features": train.n_features,
        "features": list(train.feature_names),
        "n_train": len(train),
        "n_test": len(test),
        "test_positives": int(test.y.sum()),
        "threshold": args.threshold,
        "classifier": search.best_config.model_kind,
        "config": search.best_config.to_dict(),
        "mean_cv_auc": search.mean_cv_auc,
        **best,
        "per_classifier": per_classifier,
    }
    save_model(search.model, run.path("model.json"))
    write_json(run.path("report.json"), report)
    _write_predictions(run.path("predictions.csv"), test, p, args.threshold)
    if run.figures:
        from . import plotting
        plotting.plot_roc(curves, run.path("figures/roc.png"))
        plotting.plot_confusion(ConfusionMatrix(**best["confusion"]),
                                run.path("figures/confusion.png"), title=name)
        plotting.plot_probability_histogram(test.y, p, run.path("figures/probabilities.png"), args.threshold)
        imp = split_count_importance(search.model)
        plotting.plot_split_importance(imp, run.path("figures/split_importance.png"),
                                       highlight=NEW_FEATURES)
    return report


def _variant_name(args, matrix: FeatureMatrix) -> str:
    if args.variant:
        return args.variant
    for v in ("d1", "d2", "d3"):
        if FeatureCatalog.named(v).active == matrix.feature_names:
            return v
    return "custom"


# --- commands --------------------------------------------------------------------


def cmd_featurize(args) -> int:
    run = Run("featurize", args, {"transactions": args.transactions, "labels": args.labels})
    ds = load_dataset(args.transactions, args.labels)
    catalog = FeatureCatalog.named(args.variant or "d1")
    matrix = build_feature_matrix(ds, catalog)
    write_features_csv(run.path("features.csv"), matrix)
    cont = [f for f in catalog.active if f not in INITIATOR_FLAGS]
    flags = [f for f in catalog.active if f in INITIATOR_FLAGS]
    cdfs = [emit_distribution_data(matrix, f) for f in cont]
    shares = [emit_distribution_data(matrix, f) for f in flags]
    write_distribution_csv(run.path("distributions.csv"), cdfs)
    if shares:
        write_distribution_csv(run.path("shares.csv"), shares)
    n_ponzi, n_not = ds.class_counts
    if run.figures:
        from . import plotting
        if cdfs:
            plotting.plot_distributions(cdfs, run.path("figures/distributions.png"))
        if shares:
            plotting.plot_distributions(shares, run.path("figures/shares.png"))
    run.finish({
        "n_contracts": len(ds),
        "class_counts": {"ponzi": n_ponzi, "not_ponzi": n_not},
        "unlabeled_histories": ds.unlabeled,
        "features": list(catalog.active),
    })
    print(f"featurized {len(ds)} contracts ({n_ponzi} Ponzi) into {len(catalog)} features")
    return 0


def cmd_train(args) -> int:
    run = Run("train", args, {"features": args.features, "grid": args.grid})
    matrix = _catalog_for(read_features_csv(args.features), args.variant)
    grid = _load_grid(args.grid)
    train, test = _split(matrix, args)
    search = grid_search_cv(train, grid, args.folds, args.seed, args.jobs)
    write_json(run.path("selection_report.json"), {"grid": grid.to_dict(), "folds": args.folds,
                                                   **search.to_dict()})
    report = _evaluate_winner(run, search, train, test, args, _variant_name(args, matrix))
    run.finish()
    m = report["metrics_rounded"]
    print(f"{report['classifier']}: test AUC {m['auc']} accuracy {m['accuracy']} F1 {m['f1']}")
    return 0


def cmd_rfe(args) -> int:
    run = Run("rfe", args, {"features": args.features, "grid": args.grid})
    matrix = _catalog_for(read_features_csv(args.features), args.variant)
    grid = _load_grid(args.grid)
    train, test = _split(matrix, args)
    trace = recursive_feature_elimination(train, grid, args.folds, args.seed, args.floor, args.jobs)
    write_json(run.path("rfe_trace.json"), {"grid": grid.to_dict(), "folds": args.folds,
                                            "floor": args.floor, **trace.to_dict()})
    winner = trace.winner
    FeatureCatalog("custom", winner.features).write(run.path("catalog.txt"))
    # refit the winning step on its own features and score it on the held-out rows
    sub_train, sub_test = train.select(winner.features), test.select(winner.features)
    model = trees.fit(sub_train, winner.best_config)
    save_model(model, run.path("model.json"))
    rep, p = _test_report(model, sub_test, args.threshold)
    write_json(run.path("report.json"), {
        "dataset_variant": "rfe",
        "n_features": len(winner.features),
        "features": list(winner.features),
        "removal_order": trace.removal_order,
        "classifier": winner.best_config.model_kind,
        "config": winner.best_config.to_dict(),
        "mean_cv_auc": winner.mean_cv_auc,
        "threshold": args.threshold,
        **rep,
    })
    _write_predictions(run.path("predictions.csv"), sub_test, p, args.threshold)
    if run.figures:
        from . import plotting
        plotting.plot_rfe([(len(s.features), s.mean_cv_auc) for s in trace.steps],
                          run.path("figures/rfe.png"), winner=len(winner.features))
        plotting.plot_split_importance(trace.steps[0].importance,
                                       run.path("figures/split_importance_full.png"),
                                       highlight=NEW_FEATURES)
    run.finish()
    print(f"RFE winner: {len(winner.features)} features, mean CV AUC {winner.mean_cv_auc:.4f}; "
          f"removed {', '.join(trace.removal_order) or 'nothing'}")
    return 0


def _parse_pair(text: str) -> tuple[str, str]:
    if ":" not in text:
        raise argparse.ArgumentTypeError(f"pair must look like feature:interaction, got {text!r}")
    f, g = text.split(":", 1)
    return f, g


def cmd_explain(args) -> int:
    run = Run("explain", args, {"model": args.model, "features": args.features})
    model = load_model(args.model)
    matrix = read_features_csv(args.features).select(model.feature_names)
    if args.rows == "test":
        _, matrix = _split(matrix, args)
    sm = tree_shap(model, matrix)
    try:
        err = check_local_accuracy(sm, model, matrix)
    except AssertionError as exc:
        raise ContractViolation(str(exc)) from None
    summary = shap_summary(sm, matrix)

    with open(run.path("shap.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# base_value={_fmt(sm.base_value)}\n")
        fh.write(",".join(("address",) + sm.feature_names) + "\n")
        for addr, row in zip(matrix.addresses, sm.phi):
            fh.write(",".join([addr, *map(_fmt, row)]) + "\n")
    with open(run.path("importance.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank,feature,mean_abs_shap\n")
        for rank, (name, v) in enumerate(summary.ranking, start=1):
            fh.write(f"{rank},{name},{_fmt(v)}\n")
    top = [name for name, _ in summary.ranking[:args.top_k]]
    with open(run.path("beeswarm.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,address,shap,feature_value\n")
        for name, r, phi, value in summary.beeswarm:
            if name in top:
                fh.write(f"{name},{matrix.addresses[r]},{_fmt(phi)},{_fmt(value)}\n")

    pairs = list(args.pair or [])
    if args.auto_pairs:
        pairs += [(f, pick_interaction(sm, matrix, f)) for f in top[:args.auto_pairs]]
    tables = [dependence_data(sm, matrix, f, g) for f, g in pairs]
    with open(run.path("dependence.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,interaction,feature_value,shap,interaction_value\n")
        for t in tables:
            for a, p, b in t.rows:
                fh.write(f"{t.feature},{t.interaction},{_fmt(a)},{_fmt(p)},{_fmt(b)}\n")

    if run.figures:
        from . import plotting
        plotting.plot_beeswarm(summary, run.path("figures/beeswarm.png"), args.top_k)
        for i, t in enumerate(tables, start=1):
            plotting.plot_dependence(t, run.path(f"figures/dependence_{i:02d}_{_slug(t.feature)}.png"))
    run.finish({
        "n_rows": len(matrix),
        "base_value": sm.base_value,
        "base_probability": float(trees.sigmoid(sm.base_value)) if model.link == "logit" else sm.base_value,
        "top_features": top,
        "pairs": [list(p) for p in pairs],
        "local_accuracy_ok": True,
    })
    print(f"explained {len(matrix)} rows; top features: {', '.join(top[:3])}; "
          f"max local-accuracy error {err:.2e}")
    return 0


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name)


def cmd_compare(args) -> int:
    run = Run("compare", args, {"features": args.features, "model_a": args.model_a,
                                "model_b": args.model_b})
    a, b = load_model(args.model_a), load_model(args.model_b)
    matrix = read_features_csv(args.features)
    if args.rows == "test":
        _, matrix = _split(matrix, args)
    pa = trees.predict_proba(a, matrix)
    pb = trees.predict_proba(b, matrix)
    res = mcnemar(matrix.y, pa >= args.threshold, pb >= args.threshold)
    if res.degenerate:
        log.warning("the two models make identical errors; McNemar p is 1.0 by convention")
    _, rep_a = evaluate(matrix.y, pa, args.threshold)
    _, rep_b = evaluate(matrix.y, pb, args.threshold)
    write_json(run.path("mcnemar.json"), {
        "n_rows": len(matrix),
        "threshold": args.threshold,
        **res.to_dict(),
        "significant_at_0.05": res.p_value < 0.05,
        "model_a": {"features": list(a.feature_names), "kind": a.kind, **rep_a.to_dict()},
        "model_b": {"features": list(b.feature_names), "kind": b.kind, **rep_b.to_dict()},
    })
    run.finish()
    print(f"McNemar b={res.b} c={res.c} exact p={res.p_value:.4g}")
    return 0


# --- argument parsing -----------------------------------------------------------


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _variant(text: str) -> str:
    FeatureCatalog.named(text)  # raises on an unknown name or bad file
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ponzi-lens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, split=True, model_flags=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=_u64, default=None,
                       help=f"master seed (default: ${SEED_ENV}, else 0)")
        p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("-v", "--verbose", action="store_true")
        if split:
            p.add_argument("--test-fraction", type=_fraction, default=0.2)
        if model_flags:
            p.add_argument("--threshold", type=_probability, default=0.5)

    p = sub.add_parser("featurize", help="transaction log + labels -> features.csv")
    p.add_argument("--transactions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--variant", type=_variant, default="d1", help="d1, d2, d3 or custom:<file>")
    common(p, split=False, model_flags=False)
    p.set_defaults(func=cmd_featurize)

    for name, func, help_ in (
        ("train", cmd_train, "grid search + test evaluation"),
        ("rfe", cmd_rfe, "recursive feature elimination"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--features", required=True)
        p.add_argument("--variant", type=_variant, default=None,
                       help="project the features onto a catalog first")
        p.add_argument("--grid", default=None, help="grid JSON (default: built-in grid)")
        p.add_argument("--folds", type=int, default=5)
        if name == "rfe":
            p.add_argument("--floor", type=_positive, default=13)
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("explain", help="TreeSHAP attributions for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--top-k", type=_positive, default=10)
    p.add_argument("--pair", type=_parse_pair, action="append",
                   help="dependence pair feature:interaction (repeatable)")
    p.add_argument("--auto-pairs", type=int, default=0, metavar="N",
                   help="also emit dependence data for the top N features with a picked partner")
    p.add_argument("--rows", choices=("test", "all"), default="test")
    common(p, model_flags=False)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("compare", help="McNemar test between two saved models")
    p.add_argument("--features", required=True)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--rows", choices=("test", "all"), default="test")
    common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _resolve_seed(args, parser) -> None:
    if args.seed is not None:
        return
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        args.seed = 0
        return
    try:
        args.seed = _u64(env)
    except argparse.ArgumentTypeError as exc:
        parser.error(f"${SEED_ENV}: {exc}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _resolve_seed(args, parser)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "folds", 5) < 2:
        parser.error("--folds must be >= 2")
    for pair in getattr(args, "pair", None) or []:
        for name in pair:
            if name not in FEATURES:
                parser.error(f"--pair: unknown feature {name!r}")
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (ParseError, ConfigError, ValueError, KeyError, RuntimeError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
