"""Random forest of Gini-split classification trees, plus the shared tree builder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import LearnerError, check_xy


def gini_impurity(counts) -> float:
    """``1 - sum_j p_j**2`` for a vector of class counts."""
    c = np.asarray(counts, dtype=float)
    if np.any(c < 0):
        raise LearnerError("class counts must be nonnegative")
    total = c.sum()
    if total <= 0:
        raise LearnerError("class counts sum to zero")
    p = c / total
    return float(1.0 - np.sum(p * p))


@dataclass
class Tree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


class _TreeBuilder:
    """Greedy depth-first CART growth.

    ``criterion`` is ``"gini"`` (labels in {0,1}, leaf value = fraction of
    class 1) or ``"mse"`` (real targets, leaf value = mean). ``gain`` stores
    the impurity decrease of each split weighted by the node's share of the
    samples that reached the root.
    """

    def __init__(self, criterion, max_depth, min_samples_leaf=1, m_try=None, rng=None):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.m_try = m_try
        self.rng = rng

    def build(self, X, y) -> Tree:
        self.X, self.y = X, y.astype(float)
        self.n_root = X.shape[0]
        self.nodes = []
        self._grow(np.arange(X.shape[0]), 0)
        cols = list(zip(*self.nodes))
        return Tree(np.array(cols[0], dtype=int), np.array(cols[1], dtype=float),
                    np.array(cols[2], dtype=int), np.array(cols[3], dtype=int),
                    np.array(cols[4], dtype=float), np.array(cols[5], dtype=int),
                    np.array(cols[6], dtype=float))

    def _impurity(self, y):
        if self.criterion == "gini":
            p = y.mean()
            return 2.0 * p * (1.0 - p)
        return float(np.var(y))

    def _grow(self, idx, depth):
        node_id = len(self.nodes)
        y = self.y[idx]
        self.nodes.append([-1, 0.0, -1, -1, float(y.mean()), len(idx), 0.0])
        if depth >= self.max_depth or len(idx) < 2 * self.min_samples_leaf:
            return node_id
        parent = self._impurity(y)
        if parent <= 0.0:
            return node_id
        best = self._best_split(idx, parent)
        if best is None:
            return node_id
        feat, thr, decrease = best
        mask = self.X[idx, feat] <= thr
        self.nodes[node_id][0] = feat
        self.nodes[node_id][1] = thr
        self.nodes[node_id][6] = decrease * len(idx) / self.n_root
        self.nodes[node_id][2] = self._grow(idx[mask], depth + 1)
        self.nodes[node_id][3] = self._grow(idx[~mask], depth + 1)
        return node_id

    def _best_split(self, idx, parent):
        d = self.X.shape[1]
        if self.m_try is None or self.m_try >= d:
            feats = np.arange(d)
        else:
            feats = np.sort(self.rng.choice(d, size=self.m_try, replace=False))
        n = len(idx)
        msl = self.min_samples_leaf
        best_dec, best = 1e-12, None
        y_all = self.y[idx]
        for f in feats:
            x = self.X[idx, f]
            order = np.argsort(x, kind="stable")
            xs, ys = x[order], y_all[order]
            # candidate cut after position i (left = first i+1 rows)
            valid = xs[:-1] < xs[1:]
            if not valid.any():
                continue
            nl = np.arange(1, n)
            nr = n - nl
            cs = np.cumsum(ys)[:-1]
            total = ys.sum()
            if self.criterion == "gini":
                pl = cs / nl
                pr = (total - cs) / nr
                child = (nl * 2 * pl * (1 - pl) + nr * 2 * pr * (1 - pr)) / n
            else:
                cs2 = np.cumsum(ys * ys)[:-1]
                tot2 = (ys * ys).sum()
                sse_l = cs2 - cs * cs / nl
                sse_r = (tot2 - cs2) - (total - cs) ** 2 / nr
                child = (sse_l + sse_r) / n
            valid &= (nl >= msl) & (nr >= msl)
            if not valid.any():
                continue
            dec = np.where(valid, parent - child, -np.inf)
            i = int(np.argmax(dec))
            if dec[i] > best_dec:
                best_dec = float(dec[i])
                best = (int(f), 0.5 * (xs[i] + xs[i + 1]), best_dec)
        return best


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 6
    m_try: int | None = None
    min_samples_leaf: int = 1
    seed: int = 0


@dataclass
class ForestModel:
    trees: list
    n_features: int
    max_depth: int
    m_try: int
    seed: int

    kind = "rf"

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X) -> np.ndarray:
        X = check_xy(X, n_features=self.n_features)
        return np.mean([t.predict_value(X) for t in self.trees], axis=0)


def rf_train(X, y, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """Bagged Gini trees with ``m_try`` candidate features per node."""
    X, y = check_xy(X, y)
    n, d = X.shape
    if cfg.n_trees < 1:
        raise LearnerError("n_trees must be >= 1")
    m_try = cfg.m_try if cfg.m_try is not None else max(1, int(round(np.sqrt(d))))
    if not 1 <= m_try <= d:
        raise LearnerError(f"m_try={m_try} must lie in [1, {d}]")
    if cfg.max_depth < 0:
        raise LearnerError("max_depth must be >= 0")
    trees = []
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder("gini", cfg.max_depth, cfg.min_samples_leaf, m_try, rng)
        trees.append(builder.build(X[boot], y[boot]))
    return ForestModel(trees, d, cfg.max_depth, m_try, cfg.seed)


def normalize_importance(raw) -> tuple[np.ndarray, bool]:
    """Scale nonnegative scores to sum to one; all-zero input gives a flagged uniform vector."""
    raw = np.asarray(raw, dtype=float)
    total = raw.sum()
    if total <= 0:
        return np.full(raw.size, 1.0 / raw.size), True
    return raw / total, False


def rf_feature_importance(f: ForestModel) -> tuple[np.ndarray, bool]:
    """Mean weighted Gini decrease per feature, normalized to sum to one.

    Returns ``(importance, flagged)``; ``flagged`` is True when no tree
    contains a split.
    """
    raw = np.zeros(f.n_features)
    for t in f.trees:
        internal = t.feature >= 0
        np.add.at(raw, t.feature[internal], t.gain[internal])
    return normalize_importance(raw / f.n_trees)


def rf_error_bound(rho: float, s: float) -> float:
    """Upper bound ``rho*(1-s) + (1-rho)*s`` on forest error from tree correlation and strength."""
    if not (0.0 <= rho <= 1.0 and 0.0 <= s <= 1.0):
        raise LearnerError("rho and s must both lie in [0, 1]")
    return rho * (1.0 - s) + (1.0 - rho) * s


def tree_strength_and_correlation(f: ForestModel, X, y) -> tuple[float, float]:
    """Mean tree strength (accuracy - 0.5) and mean pairwise correlation of tree outputs on ``(X, y)``."""
    X, y = check_xy(X, y)
    preds = np.array([t.predict_value(X) for t in f.trees])
    acc = ((preds > 0.5).astype(int) == y).mean(axis=1)
    s = float(np.clip(acc.mean() - 0.5, 0.0, 1.0))
    if f.n_trees < 2:
        return s, 1.0
    sd = preds.std(axis=1)
    live = preds[sd > 0]
    if len(live) < 2:
        return s, 1.0
    c = np.corrcoef(live)
    iu = np.triu_indices(len(live), 1)
    rho = float(np.clip(np.mean(c[iu]), 0.0, 1.0))
    return s, rho
