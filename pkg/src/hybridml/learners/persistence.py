"""Versioned plain-text model files.

Layout::

    # hybridml-model v1
    kind = <bnn|rf|gb|svm>
    <key> = <JSON value>
    ...

Floats are written with ``repr`` precision so a reload reproduces
predictions bit for bit. Keys appear in the order listed in ``_FIELDS``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._common import LearnerError
from .bnn import BnnModel
from .boosting import GbmModel, Stage
from .forest import ForestModel, Tree
from .svm import SvmModel

FORMAT_VERSION = 1
_HEADER = f"# hybridml-model v{FORMAT_VERSION}"
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "gain")


def _tree_dict(t: Tree) -> dict:
    return {k: getattr(t, k).tolist() for k in _TREE_FIELDS}


def _tree_from(d: dict) -> Tree:
    ints = {"feature", "left", "right", "n_samples"}
    return Tree(**{k: np.array(d[k], dtype=int if k in ints else float) for k in _TREE_FIELDS})


def model_to_text(model) -> str:
    kind = model.kind
    if kind == "bnn":
        items = [("n_features", model.n_features), ("hidden", model.hidden),
                 ("prior_std", model.prior_std), ("n_mc", model.n_mc), ("seed", model.seed),
                 ("elbo", model.elbo), ("mu", model.mu.tolist()),
                 ("log_std", model.log_std.tolist())]
    elif kind == "rf":
        items = [("n_features", model.n_features), ("max_depth", model.max_depth),
                 ("m_try", model.m_try), ("seed", model.seed), ("n_trees", model.n_trees)]
        items += [(f"tree.{i}", _tree_dict(t)) for i, t in enumerate(model.trees)]
    elif kind == "gb":
        items = [("n_features", model.n_features), ("f0", model.f0),
                 ("shrinkage", model.shrinkage), ("n_stages", len(model.stages)),
                 ("skipped", model.skipped), ("loss_trace", model.loss_trace)]
        for i, st in enumerate(model.stages):
            items.append((f"stage.{i}", {"step": st.step, "armijo_lhs": st.armijo_lhs,
                                         "armijo_rhs": st.armijo_rhs, "wolfe_ok": st.wolfe_ok,
                                         "tree": _tree_dict(st.tree)}))
    elif kind == "svm":
        items = [("C", model.C), ("objective_coef", model.objective_coef),
                 ("converged", model.converged), ("n_iter", model.n_iter), ("b", model.b),
                 ("w", model.w.tolist()), ("alpha", model.alpha.tolist())]
    else:
        raise LearnerError(f"cannot serialize model kind {kind!r}")
    lines = [_HEADER, f"kind = {kind}"]
    lines += [f"{k} = {json.dumps(v)}" for k, v in items]
    return "\n".join(lines) + "\n"


def model_from_text(text: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise LearnerError("not a hybridml model file or unsupported version")
    kv = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        kv[key] = value
    kind = kv.pop("kind")
    v = {k: json.loads(s) for k, s in kv.items()}
    if kind == "bnn":
        return BnnModel(v["n_features"], v["hidden"], np.array(v["mu"]), np.array(v["log_std"]),
                        v["prior_std"], v["n_mc"], v["seed"], v["elbo"])
    if kind == "rf":
        trees = [_tree_from(v[f"tree.{i}"]) for i in range(v["n_trees"])]
        return ForestModel(trees, v["n_features"], v["max_depth"], v["m_try"], v["seed"])
    if kind == "gb":
        stages = []
        for i in range(v["n_stages"]):
            s = v[f"stage.{i}"]
            stages.append(Stage(_tree_from(s["tree"]), s["step"], s["armijo_lhs"],
                                s["armijo_rhs"], s["wolfe_ok"]))
        return GbmModel(v["n_features"], v["f0"], v["shrinkage"], stages, v["loss_trace"],
                        v["skipped"])
    if kind == "svm":
        return SvmModel(np.array(v["alpha"]), v["b"], np.array(v["w"]), v["C"],
                        v["objective_coef"], v["converged"], v["n_iter"])
    raise LearnerError(f"unknown model kind {kind!r}")


def save_model(model, path) -> Path:
    path = Path(path)
    path.write_text(model_to_text(model), encoding="utf-8")
    return path


def load_model(path):
    return model_from_text(Path(path).read_text(encoding="utf-8"))
