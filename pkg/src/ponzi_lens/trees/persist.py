"""JSON model files.

A model file is one JSON object::

    {"format": "ponzi-lens-trees", "version": 1, "kind": ..., "link": ...,
     "base_score": ..., "tree_weight": ..., "feature_names": [...],
     "config": {...}, "trees": [<node>, ...]}

where a node is ``{"leaf": value, "cover": c}`` or
``{"feature": name, "threshold": t, "gain": g, "cover": c,
"left": <node>, "right": <node>}``. Floats are written with ``repr``
precision, so a reloaded model predicts bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

from .tree import LEAF, Tree, TreeBuilder, TreeEnsemble

FORMAT = "ponzi-lens-trees"
VERSION = 1


def _node_to_dict(tree: Tree, node: int, names) -> dict:
    cover = None if tree.cover is None else float(tree.cover[node])
    if tree.feature[node] == LEAF:
        return {"leaf": float(tree.value[node]), "cover": cover}
    return {
        "feature": names[tree.feature[node]],
        "threshold": float(tree.threshold[node]),
        "gain": float(tree.gain[node]),
        "cover": cover,
        "left": _node_to_dict(tree, int(tree.left[node]), names),
        "right": _node_to_dict(tree, int(tree.right[node]), names),
    }


def _dict_to_tree(d: dict, index: dict[str, int]) -> Tree:
    builder = TreeBuilder()
    has_cover = True

    def visit(nd, depth):
        nonlocal has_cover
        cover = nd.get("cover")
        if cover is None:
            has_cover = False
            cover = 0.0
        if "leaf" in nd:
            return builder.add(nd["leaf"], cover, depth)
        node = builder.add(0.0, cover, depth)
        left = visit(nd["left"], depth + 1)
        right = visit(nd["right"], depth + 1)
        try:
            feat = index[nd["feature"]]
        except KeyError:
            raise ValueError(f"node tests unknown feature {nd['feature']!r}") from None
        builder.split(node, feat, nd["threshold"], nd.get("gain", 0.0), left, right)
        return node

    visit(d, 0)
    tree = builder.build()
    if not has_cover:
        tree.cover = None
    return tree


def model_to_dict(model: TreeEnsemble) -> dict:
    names = model.feature_names
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "link": model.link,
        "base_score": float(model.base_score),
        "tree_weight": float(model.tree_weight),
        "feature_names": list(names),
        "config": model.config,
        "trees": [_node_to_dict(t, 0, names) for t in model.trees],
    }


def model_from_dict(d: dict) -> TreeEnsemble:
    if d.get("format") != FORMAT:
        raise ValueError("not a ponzi-lens model file")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    names = tuple(d["feature_names"])
    index = {n: i for i, n in enumerate(names)}
    return TreeEnsemble(
        kind=d["kind"],
        trees=[_dict_to_tree(t, index) for t in d["trees"]],
        feature_names=names,
        base_score=float(d["base_score"]),
        tree_weight=float(d["tree_weight"]),
        link=d["link"],
        config=dict(d.get("config", {})),
    )


def save_model(model: TreeEnsemble, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TreeEnsemble:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def models_equal(a: TreeEnsemble, b: TreeEnsemble) -> bool:
    """Structural equality, independent of node numbering."""
    return model_to_dict(a) == model_to_dict(b)
