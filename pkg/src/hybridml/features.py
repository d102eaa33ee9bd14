"""PCA feature extraction and histogram mutual information with a permutation test."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

MAX_CATEGORIES = 10


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class PcaTransform:
    components: np.ndarray  # (n_cols, q), orthonormal columns
    mean: np.ndarray
    explained_ratio: np.ndarray
    q: int

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) @ self.components.T + self.mean


def pca_fit(X, q: int) -> PcaTransform:
    """Top-``q`` eigenvectors of the sample covariance.

    Each direction is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= q <= d:
        raise FeatureError(f"q={q} must lie in [1, {d}]")
    if n <= q:
        raise FeatureError("need more rows than retained components")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False).reshape(d, d)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    for j in range(d):
        k = np.argmax(np.abs(vecs[:, j]))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    total = vals.sum()
    ratio = vals / total if total > 0 else np.zeros(d)
    return PcaTransform(vecs[:, :q], mean, ratio[:q], q)


@dataclass(frozen=True)
class MiEstimate:
    value: float
    estimator: str
    bins: tuple[int, int]
    clamped: bool = False


def is_discrete(v, max_categories: int = MAX_CATEGORIES) -> bool:
    v = np.asarray(v)
    if v.dtype.kind in "biu":
        return len(np.unique(v)) <= max_categories
    return bool(np.all(v == np.round(v))) and len(np.unique(v)) <= max_categories


def encode(v, bins: int) -> tuple[np.ndarray, int]:
    """Integer cell codes: natural categories for discrete input, else equal-width bins."""
    v = np.asarray(v, dtype=float)
    if is_discrete(v):
        cats, codes = np.unique(v, return_inverse=True)
        return codes.astype(int), len(cats)
    if bins < 2:
        raise FeatureError("bins must be >= 2 for continuous input")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros(v.size, dtype=int), 1
    codes = np.floor((v - lo) / (hi - lo) * bins).astype(int)
    return np.clip(codes, 0, bins - 1), bins


def mi_from_codes(ca, ka, cb, kb) -> float:
    n = len(ca)
    joint = np.bincount(ca * kb + cb, minlength=ka * kb).reshape(ka, kb)
    ra = joint.sum(axis=1)
    rb = joint.sum(axis=0)
    i, j = np.nonzero(joint)
    c = joint[i, j].astype(float)
    terms = (c / n) * np.log(c * n / (ra[i].astype(float) * rb[j]))
    # fsum is exactly rounded, so the result does not depend on term order
    return math.fsum(terms.tolist())


def mutual_information(a, b, bins: int = 8) -> MiEstimate:
    """Plug-in histogram estimate of I(A;B) in nats."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise FeatureError("inputs must be 1-D vectors of equal length")
    if a.size < 30:
        raise FeatureError("need at least 30 paired samples")
    ca, ka = encode(a, bins)
    cb, kb = encode(b, bins)
    value = mi_from_codes(ca, ka, cb, kb)
    clamped = value < 0
    if clamped:
        log.info("negative MI estimate %.3g clamped to 0", value)
        value = 0.0
    return MiEstimate(value, "histogram", (ka, kb), clamped)


@dataclass(frozen=True)
class FeatureSetMi:
    value: float
    mode: str
    feature: int | None = None


def feature_set_mi(X, y, bins: int = 8, mode: str = "per-feature-max") -> FeatureSetMi:
    """Reduce I(X;Y) for a feature matrix to a scalar.

    ``"per-feature-max"`` takes the largest single-column MI;
    ``"first-pc"`` uses the score on the first principal direction.
    """
    X = np.asarray(X, dtype=float)
    if mode == "per-feature-max":
        vals = [mutual_information(X[:, j], y, bins).value for j in range(X.shape[1])]
        j = int(np.argmax(vals))
        return FeatureSetMi(vals[j], mode, j)
    if mode == "first-pc":
        score = pca_fit(X, 1).transform(X)[:, 0]
        return FeatureSetMi(mutual_information(score, y, bins).value, mode, None)
    raise FeatureError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class GainReport:
    label: str
    original_mi: float
    extracted_mi: float
    gain: float
    p_value: float | None
    significant: bool | None
    n_permutations: int
    original_mode: str
    extracted_mode: str


class _GainProblem:
    """Pre-binned variables so permutations only re-count the joint table."""

    def __init__(self, X, y, bins, extracted=None, q=None):
        X = np.asarray(X, dtype=float)
        self.cols = [encode(X[:, j], bins) for j in range(X.shape[1])]
        if extracted is None:
            q = q or X.shape[1]
            extracted = pca_fit(X, q).transform(X)[:, 0]
            self.extracted_mode = "first-pc"
        else:
            self.extracted_mode = "model-score"
        self.ext = encode(np.asarray(extracted, dtype=float), bins)
        self.y = encode(y, bins)

    def gain(self, yc) -> tuple[float, float]:
        ky = self.y[1]
        orig = max(mi_from_codes(c, k, yc, ky) for c, k in self.cols)
        ext = mi_from_codes(self.ext[0], self.ext[1], yc, ky)
        return max(orig, 0.0), max(ext, 0.0)


def information_gain(X, y, q: int | None = None, bins: int = 8, extracted=None,
                     label: str = "Feature Integration") -> GainReport:
    """ΔI = I(extracted; Y) - I(X; Y), without a significance test."""
    prob = _GainProblem(X, y, bins, extracted, q)
    orig, ext = prob.gain(prob.y[0])
    return GainReport(label, orig, ext, ext - orig, None, None, 0,
                      "per-feature-max", prob.extracted_mode)


def permutation_test(X, y, B: int = 199, seed: int = 0, q: int | None = None, bins: int = 8,
                     extracted=None, label: str = "Feature Integration",
                     alpha: float = 0.05) -> GainReport:
    """One-sided permutation test of ΔI > 0, permuting the labels.

    ``p = (1 + #{permuted ΔI >= observed ΔI}) / (B + 1)``.
    """
    if B < 99:
        raise FeatureError("use at least 99 permutations")
    prob = _GainProblem(X, y, bins, extracted, q)
    orig, ext = prob.gain(prob.y[0])
    observed = ext - orig
    rng = np.random.default_rng(seed)
    yc = prob.y[0]
    hits = 0
    for _ in range(B):
        o, e = prob.gain(rng.permutation(yc))
        if e - o >= observed - 1e-12:
            hits += 1
    p = (1 + hits) / (B + 1)
    return GainReport(label, orig, ext, observed, p, p <= alpha, B,
                      "per-feature-max", prob.extracted_mode)


def gain_table_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "original_mode", "extracted_mode", "original_mi", "extracted_mi",
                "gain", "p_value", "final_proof"])
    for r in reports:
        w.writerow([r.label, r.original_mode, r.extracted_mode, repr(r.original_mi),
                    repr(r.extracted_mi), repr(r.gain),
                    "" if r.p_value is None else repr(r.p_value), r.significant])
    return buf.getvalue()
