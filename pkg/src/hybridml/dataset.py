"""Cleveland heart-disease ingestion, standardization and splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

CLEVELAND_COLUMNS = (
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal",
)


class DatasetError(ValueError):
    """Raised for malformed input files or invalid dataset operations."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    source: str = ""
    imputed_cells: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.target, dtype=int)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if y.shape != (X.shape[0],):
            raise DatasetError("target length must equal the number of rows")
        if np.isnan(X).any():
            raise DatasetError("features contain missing entries")
        if not np.isin(y, (0, 1)).all():
            raise DatasetError("target labels must be 0 or 1")
        if len(self.feature_names) != X.shape[1]:
            raise DatasetError("feature_names length must equal the number of columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_cols(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.target[idx], self.feature_names,
                       self.source, 0)


def default_data_path() -> Path:
    """Path of the bundled ``processed.cleveland.data`` file."""
    return Path(str(resources.files("hybridml") / "data" / "processed.cleveland.data"))


def load_cleveland(path=None, missing: str = "median") -> Dataset:
    """Parse the 14-column UCI Cleveland file.

    Parameters
    ----------
    path : path-like, optional
        Defaults to the copy bundled with the package.
    missing : {"median", "drop"}
        ``"median"`` fills each ``?`` with the median of the non-missing
        entries of its column; ``"drop"`` removes incomplete rows.
    """
    path = Path(path) if path is not None else default_data_path()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 14:
                raise DatasetError(
                    f"{path}:{lineno}: expected 14 fields, got {len(fields)}")
            values = []
            for col, tok in enumerate(fields):
                if tok == "?":
                    if col == 13:
                        raise DatasetError(f"{path}:{lineno}: target is missing")
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(tok))
                except ValueError:
                    raise DatasetError(
                        f"{path}:{lineno}: non-numeric token {tok!r} in column {col + 1}"
                    ) from None
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: empty file")

    raw = np.array(rows, dtype=float)
    X, num = raw[:, :13], raw[:, 13]
    if np.any(num < 0):
        raise DatasetError(f"{path}: negative diagnosis value")
    y = (num > 0).astype(int)

    mask = np.isnan(X)
    n_missing = int(mask.sum())
    if n_missing:
        if missing == "drop":
            keep = ~mask.any(axis=1)
            X, y = X[keep], y[keep]
            n_missing = 0
        elif missing == "median":
            X = X.copy()
            for j in np.flatnonzero(mask.any(axis=0)):
                present = X[~mask[:, j], j]
                if present.size == 0:
                    raise DatasetError(f"{path}: column {CLEVELAND_COLUMNS[j]} is entirely missing")
                X[mask[:, j], j] = np.median(present)
        else:
            raise DatasetError(f"unknown missing-value strategy {missing!r}")
    return Dataset(X, y, CLEVELAND_COLUMNS, str(path), n_missing)


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform; population std (ddof=0)."""

    mean: np.ndarray
    std: np.ndarray
    flagged: tuple[int, ...] = ()

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_text(self) -> str:
        lines = ["# standardizer v1", f"n_cols = {len(self.mean)}"]
        for j, (m, s) in enumerate(zip(self.mean, self.std)):
            flag = 1 if j in self.flagged else 0
            lines.append(f"col.{j} = {float(m)!r} {float(s)!r} {flag}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Standardizer":
        kv = _parse_kv(text)
        n = int(kv["n_cols"])
        means, stds, flagged = [], [], []
        for j in range(n):
            m, s, f = kv[f"col.{j}"].split()
            means.append(float(m))
            stds.append(float(s))
            if int(f):
                flagged.append(j)
        return cls(np.array(means), np.array(stds), tuple(flagged))


def fit_standardizer(X) -> Standardizer:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flagged = tuple(int(j) for j in np.flatnonzero(std == 0.0))
    std = np.where(std == 0.0, 1.0, std)
    return Standardizer(mean, std, flagged)


def standardize(d: Dataset, scaler: Standardizer | None = None) -> tuple[Dataset, Standardizer]:
    """Standardize ``d`` with ``scaler`` (fitted on ``d`` when omitted).

    Zero-variance columns are centred only and listed in ``scaler.flagged``.
    """
    if scaler is None:
        scaler = fit_standardizer(d.features)
    Z = scaler.transform(d.features)
    return Dataset(Z, d.target, d.feature_names, d.source, d.imputed_cells), scaler


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if min(fr) <= 0:
            raise DatasetError("split fractions must be positive")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise DatasetError(f"split fractions sum to {sum(fr)!r}, not 1")


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int = 0

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def to_text(self) -> str:
        def fmt(a):
            return " ".join(str(int(i)) for i in a)
        return (f"# split v1\nseed = {self.seed}\ntrain = {fmt(self.train)}\n"
                f"val = {fmt(self.val)}\ntest = {fmt(self.test)}\n")

    @classmethod
    def from_text(cls, text: str) -> "Split":
        kv = _parse_kv(text)

        def parse(s):
            return np.array([int(t) for t in s.split()], dtype=int)
        return cls(parse(kv["train"]), parse(kv["val"]), parse(kv["test"]), int(kv["seed"]))


def split(d: Dataset | int, s: SplitSpec) -> Split:
    """Seeded partition of row indices into train/validation/test.

    Validation and test sizes are ``floor(fraction * n)``; every remaining
    row goes to training, so n=303 at (0.6, 0.2, 0.2) gives (183, 60, 60).
    """
    n = d if isinstance(d, int) else d.n_rows
    if n < 10:
        raise DatasetError(f"need at least 10 rows to split, got {n}")
    n_val = math.floor(s.val_fraction * n + 1e-9)
    n_test = math.floor(s.test_fraction * n + 1e-9)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DatasetError(f"split sizes {(n_train, n_val, n_test)} contain an empty part")
    perm = np.random.default_rng(s.seed).permutation(n)
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
                 np.sort(perm[n_train + n_val:]), s.seed)


def chol_histogram(d: Dataset, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges and counts of the raw ``chol`` column."""
    if bins < 1:
        raise DatasetError("bins must be >= 1")
    col = d.feature_names.index("chol")
    counts, edges = np.histogram(d.features[:, col], bins=bins)
    return edges, counts


def _parse_kv(text: str) -> dict[str, str]:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    return kv
