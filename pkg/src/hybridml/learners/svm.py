"""Soft-margin linear SVM trained in the dual by sequential minimal optimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import LearnerError, check_xy, sigmoid


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tol: float = 1e-9
    max_passes: int = 100000
    objective_coef: float = 0.5
    seed: int = 0


@dataclass
class SvmModel:
    alpha: np.ndarray
    b: float
    w: np.ndarray
    C: float
    objective_coef: float
    converged: bool
    n_iter: int

    kind = "svm"

    @property
    def n_features(self) -> int:
        return self.w.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    def decision_function(self, X) -> np.ndarray:
        X = check_xy(X, n_features=self.n_features)
        return X @ self.w + self.b

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def _to_pm1(y):
    y = np.asarray(y)
    u = np.unique(y)
    if not set(u.tolist()) <= {0, 1, -1}:
        raise LearnerError("labels must be binary (0/1 or -1/+1)")
    s = np.where(y > 0, 1.0, -1.0)
    if len(np.unique(s)) < 2:
        raise LearnerError("SVM needs both classes present")
    return s


def svm_train(X, y, cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """Solve ``min c*||w||^2 + C*sum(xi)`` through its dual.

    With ``c = objective_coef`` the dual reads
    ``max sum(a) - 1/(4c) a^T Q a`` subject to ``0 <= a <= C`` and
    ``y^T a = 0``, and ``w = sum(a_i y_i x_i) / (2c)``. The working pair at
    each step is the maximal KKT violator; iteration stops once the
    violation gap drops below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise LearnerError("expected a 2-D feature matrix")
    ys = _to_pm1(y)
    if len(ys) != X.shape[0]:
        raise LearnerError("label vector length does not match the feature matrix")
    if cfg.C <= 0 or cfg.objective_coef <= 0:
        raise LearnerError("C and objective_coef must be positive")
    n = X.shape[0]
    scale = 1.0 / (2.0 * cfg.objective_coef)
    Q = scale * (ys[:, None] * ys[None, :]) * (X @ X.T)
    C = cfg.C
    a = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a^T Q a - sum(a)
    converged = False
    it = 0
    for it in range(1, cfg.max_passes + 1):
        up = ((ys > 0) & (a < C)) | ((ys < 0) & (a > 0))
        low = ((ys > 0) & (a > 0)) | ((ys < 0) & (a < C))
        score = -ys * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        if score[i] - score[j] < cfg.tol:
            converged = True
            break
        # move along direction d_i = y_i t, d_j = -y_j t
        quad = Q[i, i] + Q[j, j] - 2.0 * ys[i] * ys[j] * Q[i, j]
        quad = max(quad, 1e-12)
        t = (score[i] - score[j]) / quad
        t_max_i = C - a[i] if ys[i] > 0 else a[i]
        t_max_j = a[j] if ys[j] > 0 else C - a[j]
        t = min(t, t_max_i, t_max_j)
        di, dj = ys[i] * t, -ys[j] * t
        a[i] += di
        a[j] += dj
        a[i] = min(max(a[i], 0.0), C)
        a[j] = min(max(a[j], 0.0), C)
        G += Q[:, i] * di + Q[:, j] * dj
    w = scale * (a * ys) @ X
    b = _bias(a, ys, X @ w, C)
    return SvmModel(a, b, w, C, cfg.objective_coef, converged, it)


def _bias(a, ys, wx, C):
    free = (a > 1e-12 * C) & (a < C * (1 - 1e-12))
    if free.any():
        return float(np.mean(ys[free] - wx[free]))
    # no free vectors: midpoint of the feasible interval
    r = ys - wx
    lo = np.max(np.where(((ys > 0) & (a < C)) | ((ys < 0) & (a > 0)), r, -np.inf))
    hi = np.min(np.where(((ys > 0) & (a > 0)) | ((ys < 0) & (a < C)), r, np.inf))
    if np.isfinite(lo) and np.isfinite(hi):
        return float(0.5 * (lo + hi))
    return float(lo if np.isfinite(lo) else hi)


def kkt_residuals(m: SvmModel, X, y) -> np.ndarray:
    """Per-row violation of the soft-margin KKT conditions."""
    ys = _to_pm1(y)
    margin = ys * (np.asarray(X, dtype=float) @ m.w + m.b) - 1.0
    eps = 1e-12 * m.C
    res = np.where(m.alpha <= eps, np.maximum(0.0, -margin),
                   np.where(m.alpha >= m.C - eps, np.maximum(0.0, margin), np.abs(margin)))
    return res


def dual_equality_residual(m: SvmModel, y) -> float:
    return float(abs(np.dot(m.alpha, _to_pm1(y))))


def svm_margin(m: SvmModel) -> float:
    """Geometric margin width ``2 / ||w||``."""
    norm = float(np.linalg.norm(m.w))
    if norm == 0.0:
        raise LearnerError("weight vector is zero; margin undefined")
    return 2.0 / norm
