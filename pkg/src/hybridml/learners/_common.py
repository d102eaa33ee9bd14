from __future__ import annotations

import numpy as np


class LearnerError(ValueError):
    """Invalid learner configuration or input."""


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    z = np.asarray(z, dtype=float)
    return np.logaddexp(0.0, z)


def check_xy(X, y=None, n_features=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise LearnerError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise LearnerError(
            f"dimension mismatch: model expects {n_features} features, got {X.shape[1]}")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise LearnerError("label vector length does not match the feature matrix")
    if not np.isin(y, (0, 1)).all():
        raise LearnerError("labels must be binary 0/1")
    return X, y.astype(int)
