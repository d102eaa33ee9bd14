"""End-to-end experiment stages that turn a config into result tables."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .dataset import Dataset, load_cleveland, split, standardize
from .ensemble import (
    build_risk,
    diversity_score,
    ensemble_predict,
    estimate_errors,
    optimize_weights,
    tradeoff_sweep,
)
from .features import permutation_test
from .hyperopt import (
    RestartPolicy,
    basin_fraction,
    bo_minimize,
    mc_convergence_probability,
    plateau,
    restart_benchmark,
    two_basin,
)
from .learners import (
    LEARNER_NAMES,
    ForestConfig,
    BoostConfig,
    SvmConfig,
    model_to_text,
    predict,
    train_learner,
)
from .learners.forest import rf_error_bound, tree_strength_and_correlation
from .stacking import meta_train, mse_table, oof_predictions, stack_predict

MANIFEST = "MANIFEST"


class PipelineError(RuntimeError):
    """A stage failure; the message starts with the failing stage name."""


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class OutputDir:
    """Writes confined to one directory, with a SHA-256 manifest."""

    def __init__(self, root):
        self.root = Path(root).resolve()
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, rel: str) -> Path:
        p = (self.root / rel).resolve()
        if self.root != p and self.root not in p.parents:
            raise PipelineError(f"output: refusing to write outside {self.root}: {rel}")
        return p

    def write(self, rel: str, text: str) -> Path:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return p

    def files(self) -> list[str]:
        out = []
        for dirpath, _, names in os.walk(self.root):
            for n in names:
                rel = Path(dirpath, n).relative_to(self.root).as_posix()
                if rel != MANIFEST:
                    out.append(rel)
        return sorted(out)

    def write_manifest(self, complete: bool, stages=()) -> Path:
        lines = [f"# complete: {str(complete).lower()}"]
        if stages:
            lines.append(f"# stages: {' '.join(stages)}")
        for rel in self.files():
            digest = hashlib.sha256(self.path(rel).read_bytes()).hexdigest()
            lines.append(f"{digest}  {rel}")
        return self.write(MANIFEST, "\n".join(lines) + "\n")


def load_data(cfg: ExperimentConfig) -> Dataset:
    path = cfg.get("data", "path") or None
    return load_cleveland(path, missing=cfg.get("data", "missing"))


@dataclass
class Prepared:
    train: Dataset
    val: Dataset
    test: Dataset
    scaler: object
    split: object


def prepare(d: Dataset, cfg: ExperimentConfig, offset: int = 0) -> Prepared:
    sp = split(d, cfg.split_spec(offset))
    train, scaler = standardize(d.subset(sp.train))
    val, _ = standardize(d.subset(sp.val), scaler)
    test, _ = standardize(d.subset(sp.test), scaler)
    return Prepared(train, val, test, scaler, sp)


def train_all(p: Prepared, configs: dict) -> dict:
    return {n: train_learner(n, p.train.features, p.train.target, configs[n]) for n in LEARNER_NAMES}


def prob_matrix(models: dict, X) -> np.ndarray:
    return np.column_stack([predict(models[n], X) for n in LEARNER_NAMES])


# ---------------------------------------------------------------- stages


def stage_ingest(d: Dataset, cfg: ExperimentConfig) -> dict:
    p = prepare(d, cfg)
    rows = [(name, float(d.features[:, j].mean()), float(d.features[:, j].std()))
            for j, name in enumerate(d.feature_names)]
    summary = csv_text(["feature", "mean", "std"], rows)
    meta = csv_text(["key", "value"], [("rows", d.n_rows), ("columns", d.n_cols),
                                       ("imputed_cells", d.imputed_cells),
                                       ("positive_rate", float(d.target.mean())),
                                       ("train", p.split.sizes()[0]), ("val", p.split.sizes()[1]),
                                       ("test", p.split.sizes()[2])])
    return {"data/summary.csv": summary, "data/dataset.csv": meta,
            "data/split.txt": p.split.to_text(), "data/scaler.txt": p.scaler.to_text()}


def stage_train(d: Dataset, cfg: ExperimentConfig) -> dict:
    p = prepare(d, cfg)
    models = train_all(p, cfg.learner_configs(cfg.seed))
    out = {f"models/{n.lower()}.txt": model_to_text(models[n]) for n in LEARNER_NAMES}
    ev = estimate_errors(prob_matrix(models, p.val.features), p.val.target)
    et = estimate_errors(prob_matrix(models, p.test.features), p.test.target)
    out["train_errors.csv"] = csv_text(["model", "val_error", "test_error"],
                                       [(n, ev[i], et[i]) for i, n in enumerate(LEARNER_NAMES)])
    return out


def stage_ensemble(d: Dataset, cfg: ExperimentConfig) -> dict:
    """Generalization error per learner and for the optimized ensemble over re-splits."""
    R = cfg.get("split", "resplits")
    errs, weights = [], []
    out = {}
    for r in range(R):
        p = prepare(d, cfg, offset=r)
        models = train_all(p, cfg.learner_configs(cfg.seed + r))
        risk = build_risk(LEARNER_NAMES, prob_matrix(models, p.val.features), p.val.target)
        ew = optimize_weights(risk, cfg.ensemble_config())
        Pt = prob_matrix(models, p.test.features)
        e = estimate_errors(Pt, p.test.target)
        e_ens = estimate_errors(ensemble_predict(Pt, ew.w), p.test.target)[0]
        errs.append([*e, e_ens])
        weights.append((r, *ew.w, ew.lam, ew.objective, ew.solver))
        if r == 0:
            out["ensemble/risk.csv"] = risk.to_csv()
            out["ensemble/weights.csv"] = ew.to_csv()
            out["ensemble/tradeoff.csv"] = csv_text(
                ["alpha", "beta", "combined_loss"], tradeoff_sweep(ew.w, risk))
            forest = models["RF"]
            s, rho = tree_strength_and_correlation(forest, p.test.features, p.test.target)
            out["ensemble/forest_bound.csv"] = csv_text(
                ["strength", "correlation", "bound", "diversity"],
                [(s, rho, rf_error_bound(rho, s), diversity_score(risk.rho))])
            for n in LEARNER_NAMES:
                out[f"models/{n.lower()}.txt"] = model_to_text(models[n])
    E = np.array(errs)
    labels = [*LEARNER_NAMES, "Ensemble"]
    sd = E.std(axis=0, ddof=1) if R > 1 else np.zeros(E.shape[1])
    rows = [(lab, float(E[:, j].mean()), float(sd[j]), *map(float, E[:, j]))
            for j, lab in enumerate(labels)]
    out["fig1_generalization_error.csv"] = csv_text(
        ["model", "mean_error", "std_error", *(f"split_{r}" for r in range(R))], rows)
    out["ensemble/weights_by_split.csv"] = csv_text(
        ["split", *(f"w_{n}" for n in LEARNER_NAMES), "lambda", "objective", "solver"], weights)
    return out


def stage_stack(d: Dataset, cfg: ExperimentConfig) -> dict:
    """Out-of-fold stacking on the training split, scored on the test split."""
    p = prepare(d, cfg)
    configs = cfg.learner_configs(cfg.seed)
    k = cfg.get("stacking", "k")
    mf = oof_predictions(p.train.features, p.train.target, configs, k=k, seed=cfg.seed)
    meta, trace = meta_train(mf.matrix, p.train.target, cfg.meta_config(cfg.seed))
    models = train_all(p, configs)
    Pt = prob_matrix(models, p.test.features)
    stacked = stack_predict(meta, Pt)
    conv = {"SVM": bool(models["SVM"].converged), "Stack": trace.converged}
    table = mse_table(LEARNER_NAMES, Pt, stacked, p.test.target, conv)
    out = {
        "fig2_meta_loss.csv": csv_text(["model", "mse", "converged"],
                                       [(r["model"], r["mse"], r["converged"]) for r in table]),
        "stacking/convergence.csv": trace.to_csv(),
        "stacking/oof_features.csv": mf.to_csv(),
        "stacking/meta_model.csv": csv_text(
            ["term", "value"], [*((f"coef_{n}", c) for n, c in zip(mf.names, meta.coef)),
                                ("intercept", meta.intercept), ("epochs", len(trace.losses))]),
    }
    return out


def stage_mi(d: Dataset, cfg: ExperimentConfig) -> dict:
    """Information gain of PCA scores and of out-of-fold model scores over raw features."""
    full, _ = standardize(d)
    X, y = full.features, full.target
    bins = cfg.get("mi", "bins")
    B = cfg.get("mi", "permutations")
    q = cfg.get("mi", "q") or None
    reports = [permutation_test(X, y, B=B, seed=cfg.seed, q=q, bins=bins)]
    mf = oof_predictions(X, y, cfg.learner_configs(cfg.seed), k=cfg.get("stacking", "k"),
                         seed=cfg.seed)
    for j, name in enumerate(mf.names):
        reports.append(permutation_test(X, y, B=B, seed=cfg.seed, bins=bins,
                                        extracted=mf.matrix[:, j], label=name))
    rows = [(r.label, r.original_mode, r.extracted_mode, r.original_mi, r.extracted_mi,
             r.gain, r.p_value, r.significant) for r in reports]
    return {"fig3_information_gain.csv": csv_text(
        ["model", "original_mode", "extracted_mode", "original_mi", "extracted_mi",
         "gain", "p_value", "significant"], rows)}


def tuning_objective(d: Dataset, cfg: ExperimentConfig, seed: int):
    """Validation Brier score of the optimized ensemble as a function of tuned hyperparameters.

    The BNN is trained once and held fixed; RF, GB and SVM are refit per call.
    """
    p = prepare(d, cfg)
    base = cfg.learner_configs(seed)
    bnn = train_learner("BNN", p.train.features, p.train.target, base["BNN"])
    p_bnn = predict(bnn, p.val.features)
    Xt, yt, Xv, yv = p.train.features, p.train.target, p.val.features, p.val.target
    rf0, gb0, svm0 = base["RF"], base["GB"], base["SVM"]

    def objective(x: dict) -> float:
        rf = train_learner("RF", Xt, yt, ForestConfig(
            n_trees=int(x["rf_trees"]), max_depth=rf0.max_depth, m_try=rf0.m_try,
            min_samples_leaf=rf0.min_samples_leaf, seed=seed))
        gb = train_learner("GB", Xt, yt, BoostConfig(
            n_stages=gb0.n_stages, max_depth=int(x["gb_depth"]), shrinkage=x["gb_shrinkage"],
            min_samples_leaf=gb0.min_samples_leaf, seed=seed))
        svm = train_learner("SVM", Xt, yt, SvmConfig(
            C=x["svm_C"], tol=svm0.tol, max_passes=svm0.max_passes, seed=seed))
        P = np.column_stack([p_bnn, predict(rf, Xv), predict(gb, Xv), predict(svm, Xv)])
        w = optimize_weights(build_risk(LEARNER_NAMES, P, yv), cfg.ensemble_config()).w
        return float(np.mean((ensemble_predict(P, w) - yv) ** 2))

    return objective


def stage_tune(d: Dataset, cfg: ExperimentConfig) -> dict:
    space = cfg.search_space()
    policy = cfg.restart_policy()
    budget = cfg.get("bo", "budget")
    rows = []
    for s in range(cfg.get("bo", "seeds")):
        seed = cfg.seed + s
        trace = bo_minimize(tuning_objective(d, cfg, seed), space, budget, policy, seed=seed)
        for i in range(trace.n):
            ei = trace.max_ei[i]
            rows.append((s, i + 1, *(trace.xs[i][n] for n in space.names), trace.fs[i],
                         trace.incumbent[i], "" if ei is None else float(ei), trace.events[i]))
    return {"fig4_ei_trace.csv": csv_text(
        ["seed", "iteration", *space.names, "f", "incumbent", "max_ei", "event"], rows)}


def stage_restart(d: Dataset | None, cfg: ExperimentConfig) -> dict:
    trials = cfg.get("restart", "trials")
    q = cfg.get("restart", "q")
    f = two_basin(q)
    q_hat = basin_fraction(f, -1.0, 1e-6)
    rows = []
    for R in (1, 2, 4, 8):
        p = mc_convergence_probability(f, -1.0, R, trials, seed=cfg.seed)
        model = (1 - q_hat) ** R
        se = math.sqrt(model * (1 - model) / trials)
        rows.append((R, p, model, se))
    b = cfg.values["bo"]
    res = restart_benchmark(plateau, 0.0, RestartPolicy("random"),
                            RestartPolicy("adaptive", b["window"], b["delta"]),
                            trials=trials, seed=cfg.seed)
    summary = csv_text(["policy", "mean_iterations", "capped"],
                       [("random", res.mean_random, res.random_capped),
                        ("adaptive", res.mean_adaptive, res.adaptive_capped)])
    summary += csv_text(["statistic", "p_value"], [(res.statistic, res.p_value)])
    return {"restart/convergence_probability.csv": csv_text(
                ["restarts", "p_bar", "geometric_model", "binomial_se"], rows),
            "restart/benchmark_trials.csv": res.to_csv(),
            "restart/benchmark_summary.csv": summary}


STAGES = {
    "ingest": stage_ingest,
    "train": stage_train,
    "ensemble": stage_ensemble,
    "stack": stage_stack,
    "mi": stage_mi,
    "tune": stage_tune,
    "restart-bench": stage_restart,
}


def planned_stages(cfg: ExperimentConfig) -> list[str]:
    stages = ["ingest", "ensemble", "stack", "mi"]
    if cfg.get("bo", "enabled"):
        stages.append("tune")
    if cfg.get("restart", "enabled"):
        stages.append("restart-bench")
    return stages


@dataclass
class ExperimentReport:
    out: Path
    files: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    wall_time: float = 0.0


def run_stages(cfg: ExperimentConfig, stages, out: OutputDir | None = None) -> ExperimentReport:
    """Run ``stages`` in order, writing each stage's files as it finishes.

    A failing stage raises :class:`PipelineError` named after it; files
    already written stay and the manifest marks the run incomplete.
    """
    from .plots import render_all

    out = out or OutputDir(cfg.out)
    t0 = time.perf_counter()
    report = ExperimentReport(out.root)
    try:
        d = load_data(cfg)
    except Exception as exc:
        out.write_manifest(False, report.stages)
        raise PipelineError(f"dataset: {exc}") from exc
    for name in stages:
        try:
            files = STAGES[name](d, cfg)
        except Exception as exc:
            out.write_manifest(False, report.stages)
            raise PipelineError(f"{name}: {exc}") from exc
        for rel, text in files.items():
            out.write(rel, text)
            report.files.append(rel)
        report.stages.append(name)
    for rel, text in render_all(out.root).items():
        out.write(rel, text)
        report.files.append(rel)
    report.wall_time = time.perf_counter() - t0
    out.write("run_metadata.txt", "\n".join([
        f"seed = {cfg.seed}", f"stages = {' '.join(report.stages)}",
        f"hybridml = {__version__}", f"numpy = {np.__version__}", f"scipy = {scipy.__version__}",
        f"python = {platform.python_version()}", f"wall_time_s = {report.wall_time:.3f}",
    ]) + "\n")
    out.write_manifest(True, report.stages)
    return report


def run_all(cfg: ExperimentConfig) -> ExperimentReport:
    return run_stages(cfg, planned_stages(cfg))


def describe(cfg: ExperimentConfig) -> str:
    stages = planned_stages(cfg)
    lines = [f"seed: {cfg.seed}", f"output: {cfg.out}",
             f"data: {cfg.get('data', 'path') or 'bundled Cleveland file'}"
             f" (missing={cfg.get('data', 'missing')})",
             f"learners: {', '.join(LEARNER_NAMES)}", "stages:"]
    plan = {
        "ingest": "load, impute and split the data",
        "ensemble": f"fig1: learner and ensemble error over {cfg.get('split', 'resplits')} re-splits",
        "stack": f"fig2: {cfg.get('stacking', 'k')}-fold stacking meta-model",
        "mi": f"fig3: information gain with {cfg.get('mi', 'permutations')} permutations",
        "tune": f"fig4: Bayesian tuning, budget {cfg.get('bo', 'budget')} x "
                f"{cfg.get('bo', 'seeds')} seeds, {cfg.get('bo', 'policy')} restarts",
        "restart-bench": f"restart benchmarks over {cfg.get('restart', 'trials')} trials",
    }
    for i, s in enumerate(stages, 1):
        lines.append(f"  {i}. {s}: {plan[s]}")
    return "\n".join(lines) + "\n"
