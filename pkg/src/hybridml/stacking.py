"""Stacked generalization: a linear meta-model over out-of-fold base predictions."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .learners import LEARNER_NAMES, LearnerError, predict, train_learner

log = logging.getLogger(__name__)


class StackingError(RuntimeError):
    pass


@dataclass
class MetaFeatures:
    matrix: np.ndarray
    folds: np.ndarray
    k: int
    names: tuple[str, ...]
    train_sets: list = field(default_factory=list, repr=False)
    flagged: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "fold", *self.names])
        for i, (f, row) in enumerate(zip(self.folds, self.matrix)):
            w.writerow([i, int(f), *(repr(float(v)) for v in row)])
        return buf.getvalue()


def fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Random fold ids whose counts differ by at most one."""
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % k
    return folds


def oof_predictions(X, y, configs: dict, k: int = 5, seed: int = 0) -> MetaFeatures:
    """Out-of-fold class-1 probabilities for each learner in ``configs``.

    ``configs`` maps learner name to its config. Row ``i`` of the result is
    predicted only by models fitted on folds other than ``folds[i]``. A fold
    whose training part holds a single class gets its SVM column filled
    with the training base rate and is reported in ``flagged``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = len(y)
    if k < 2 or n < 2 * k:
        raise StackingError(f"need k >= 2 and at least 2k rows (k={k}, rows={n})")
    names = tuple(configs)
    folds = fold_assignment(n, k, seed)
    M = np.full((n, len(names)), np.nan)
    train_sets, flagged = [], []
    for f in range(k):
        held = folds == f
        tr = np.flatnonzero(~held)
        train_sets.append(tr)
        base_rate = float(y[tr].mean())
        for j, name in enumerate(names):
            try:
                model = train_learner(name, X[tr], y[tr], configs[name])
            except LearnerError:
                if name != "SVM" or len(np.unique(y[tr])) > 1:
                    raise
                flagged.append((f, name))
                M[held, j] = base_rate
                continue
            M[held, j] = predict(model, X[held])
    return MetaFeatures(M, folds, k, names, train_sets, flagged)


@dataclass(frozen=True)
class MetaConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 5000
    half_life: float = 1000.0
    anneal: bool = True
    window: int = 10
    rel_tol: float = 1e-8
    seed: int = 0


@dataclass
class MetaModel:
    coef: np.ndarray
    intercept: float
    m: np.ndarray
    v: np.ndarray
    t: int
    learning_rate: float
    half_life: float

    @property
    def params(self) -> np.ndarray:
        return np.append(self.coef, self.intercept)

    def predict_raw(self, F) -> np.ndarray:
        return np.asarray(F, dtype=float) @ self.coef + self.intercept


@dataclass
class ConvergenceTrace:
    losses: list
    converged: bool = False
    epoch: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(self.losses, start=1):
            w.writerow([i, repr(float(loss))])
        return buf.getvalue()


def meta_loss(params, F, y) -> tuple[float, float]:
    """Summed squared error of the linear meta-model and its per-row mean."""
    F = np.asarray(F, dtype=float)
    r = np.asarray(y, dtype=float) - (F @ params[:-1] + params[-1])
    total = float(r @ r)
    return total, total / len(r)


def meta_grad(params, F, y) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    r = np.asarray(y, dtype=float) - (F @ params[:-1] + params[-1])
    return np.append(-2.0 * F.T @ r, -2.0 * r.sum())


def init_meta(n_models: int, cfg: MetaConfig) -> MetaModel:
    rng = np.random.default_rng(cfg.seed)
    coef = 1.0 / n_models + 0.01 * rng.standard_normal(n_models)
    z = np.zeros(n_models + 1)
    return MetaModel(coef, 0.0, z.copy(), z.copy(), 0, cfg.learning_rate, cfg.half_life)


def meta_train(F, y, cfg: MetaConfig = MetaConfig(), init: MetaModel | None = None):
    """Full-batch Adam on the summed squared meta-loss.

    The step size is ``lr / (1 + t / half_life)`` when annealing is on.
    Training stops once the mean loss over the last ``window`` epochs
    improves on the preceding window by less than ``rel_tol`` relative.
    """
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    meta = init if init is not None else init_meta(F.shape[1], cfg)
    theta = meta.params
    m, v, t = meta.m.copy(), meta.v.copy(), meta.t
    trace = ConvergenceTrace([])
    W = cfg.window
    for epoch in range(1, cfg.epochs + 1):
        loss, _ = meta_loss(theta, F, y)
        if not math.isfinite(loss):
            raise StackingError(f"meta-loss diverged at epoch {epoch}")
        trace.losses.append(loss)
        if epoch >= 2 * W:
            prev = float(np.mean(trace.losses[-2 * W:-W]))
            cur = float(np.mean(trace.losses[-W:]))
            if prev - cur < cfg.rel_tol * max(abs(prev), 1e-300):
                trace.converged = True
                trace.epoch = epoch
                break
        g = meta_grad(theta, F, y)
        t += 1
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        mhat = m / (1 - cfg.beta1 ** t)
        vhat = v / (1 - cfg.beta2 ** t)
        lr = cfg.learning_rate / (1.0 + t / cfg.half_life) if cfg.anneal else cfg.learning_rate
        theta = theta - lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)
    out = replace(meta, coef=theta[:-1].copy(), intercept=float(theta[-1]), m=m, v=v, t=t)
    return out, trace


def stack_predict(meta: MetaModel, prob_columns) -> np.ndarray:
    """Meta-model output on base-model probabilities, clipped to [0, 1]."""
    return np.clip(meta.predict_raw(prob_columns), 0.0, 1.0)


def mse_table(names, prob_columns, stacked, y, converged: dict) -> list[dict]:
    """Per-model and stacked mean squared error rows for reporting."""
    y = np.asarray(y, dtype=float)
    P = np.asarray(prob_columns, dtype=float)
    rows = [{"model": n, "mse": float(np.mean((P[:, j] - y) ** 2)),
             "converged": converged.get(n, True)} for j, n in enumerate(names)]
    rows.append({"model": "Stack", "mse": float(np.mean((stacked - y) ** 2)),
                 "converged": converged.get("Stack", False)})
    return rows


__all__ = [
    "ConvergenceTrace", "LEARNER_NAMES", "MetaConfig", "MetaFeatures", "MetaModel",
    "StackingError", "fold_assignment", "init_meta", "meta_grad", "meta_loss", "meta_train",
    "mse_table", "oof_predictions", "stack_predict",
]
