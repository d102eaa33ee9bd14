"""Gradient boosting for binary classification with a line-searched step size."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._common import LearnerError, check_xy, sigmoid, softplus
from .forest import Tree, _TreeBuilder

log = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4
WOLFE_C2 = 0.9
MAX_BACKTRACKS = 50


@dataclass(frozen=True)
class BoostConfig:
    n_stages: int = 100
    max_depth: int = 2
    shrinkage: float = 0.1
    min_samples_leaf: int = 5
    seed: int = 0


@dataclass
class Stage:
    tree: Tree
    step: float
    armijo_lhs: float
    armijo_rhs: float
    wolfe_ok: bool


@dataclass
class GbmModel:
    n_features: int
    f0: float
    shrinkage: float
    stages: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    skipped: int = 0

    kind = "gb"

    def decision_function(self, X) -> np.ndarray:
        X = check_xy(X, n_features=self.n_features)
        F = np.full(X.shape[0], self.f0)
        for st in self.stages:
            F += self.shrinkage * st.step * st.tree.predict_value(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def logistic_loss(y, F) -> float:
    """Mean negative Bernoulli log-likelihood at log-odds ``F``."""
    return float(np.mean(softplus(F) - y * F))


def armijo_line_search(y, F, h, alpha0):
    """Backtrack from ``alpha0`` until the Armijo condition holds.

    Returns ``(alpha, lhs, rhs, wolfe_ok)`` or ``None`` after
    ``MAX_BACKTRACKS`` halvings. ``lhs``/``rhs`` are the two sides of
    ``phi(alpha) <= phi(0) + c1 * alpha * phi'(0)``; ``wolfe_ok`` reports the
    strong curvature condition ``|phi'(alpha)| <= c2 |phi'(0)|``.
    """
    n = len(y)
    phi0 = logistic_loss(y, F)
    dphi0 = float(np.dot(sigmoid(F) - y, h)) / n
    if not dphi0 < 0:
        return None
    alpha = alpha0
    for _ in range(MAX_BACKTRACKS):
        Fa = F + alpha * h
        lhs = logistic_loss(y, Fa)
        rhs = phi0 + ARMIJO_C1 * alpha * dphi0
        if lhs <= rhs:
            dphi = float(np.dot(sigmoid(Fa) - y, h)) / n
            return alpha, lhs, rhs, abs(dphi) <= WOLFE_C2 * abs(dphi0)
        alpha *= 0.5
    return None


def gb_train(X, y, cfg: BoostConfig = BoostConfig()) -> GbmModel:
    """Boost least-squares regression trees on the negative logistic gradient.

    Stage ``m`` fits a tree ``h_m`` to ``y - p``, picks ``alpha_m`` by
    Armijo backtracking started from the one-dimensional Newton step, and
    updates ``F += shrinkage * alpha_m * h_m``. Stages whose line search
    fails are skipped with a warning.
    """
    X, y = check_xy(X, y)
    if cfg.n_stages < 0 or not 0 < cfg.shrinkage <= 1:
        raise LearnerError("n_stages must be >= 0 and shrinkage in (0, 1]")
    rate = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    f0 = math.log(rate / (1 - rate))
    model = GbmModel(X.shape[1], f0, cfg.shrinkage)
    F = np.full(X.shape[0], f0)
    model.loss_trace.append(logistic_loss(y, F))
    for m in range(cfg.n_stages):
        p = sigmoid(F)
        residual = y - p
        tree = _TreeBuilder("mse", cfg.max_depth, cfg.min_samples_leaf).build(X, residual)
        h = tree.predict_value(X)
        curvature = float(np.dot(p * (1 - p), h * h))
        if curvature <= 0 or not np.any(h):
            model.skipped += 1
            log.warning("stage %d: degenerate weak learner, skipped", m)
            continue
        alpha0 = float(np.dot(residual, h)) / curvature
        found = armijo_line_search(y, F, h, alpha0)
        if found is None:
            model.skipped += 1
            log.warning("stage %d: line search failed, skipped", m)
            continue
        alpha, lhs, rhs, wolfe = found
        model.stages.append(Stage(tree, alpha, lhs, rhs, wolfe))
        F = F + cfg.shrinkage * alpha * h
        model.loss_trace.append(logistic_loss(y, F))
    return model
