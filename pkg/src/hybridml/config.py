"""Experiment configuration: an INI file with typed, validated keys."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .dataset import SplitSpec
from .ensemble import EnsembleConfig
from .hyperopt import Dim, RestartPolicy, SearchSpace
from .learners import BnnConfig, BoostConfig, ForestConfig, SvmConfig
from .stacking import MetaConfig


class ConfigError(ValueError):
    """Raised with a ``section.key`` path naming the first invalid entry."""


# (type, default, check, description); check returns an error string or None
_pos = lambda v: None if v > 0 else "must be > 0"  # noqa: E731
_nonneg = lambda v: None if v >= 0 else "must be >= 0"  # noqa: E731
_frac = lambda v: None if 0 < v < 1 else "must lie in (0, 1)"  # noqa: E731
_ge = lambda lo: (lambda v: None if v >= lo else f"must be >= {lo}")  # noqa: E731
_any = lambda v: None  # noqa: E731
_choice = lambda *opts: (lambda v: None if v in opts else f"must be one of {', '.join(opts)}")  # noqa: E731

SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "seed": (int, 0, _nonneg, "global seed; every stage derives its seed from it"),
        "out": (str, "results", _any, "output directory"),
    },
    "data": {
        "path": (str, "", _any, "Cleveland file; empty uses the bundled copy"),
        "missing": (str, "median", _choice("median", "drop"), "missing-value handling"),
    },
    "split": {
        "train": (float, 0.6, _frac, "train fraction"),
        "val": (float, 0.2, _frac, "validation fraction"),
        "test": (float, 0.2, _frac, "test fraction"),
        "resplits": (int, 5, _ge(1), "seeded re-splits for error bars"),
    },
    "bnn": {
        "hidden": (int, 8, _ge(1), "hidden units"),
        "prior_std": (float, 0.5, _pos, "Gaussian prior std"),
        "learning_rate": (float, 0.02, _pos, "Adam step"),
        "epochs": (int, 800, _nonneg, "training epochs"),
        "mc_train": (int, 4, _ge(1), "reparameterization samples per step"),
        "n_mc": (int, 200, _ge(1), "posterior samples at prediction"),
    },
    "rf": {
        "n_trees": (int, 200, _ge(1), "trees"),
        "max_depth": (int, 6, _ge(1), "maximum depth"),
        "m_try": (int, 0, _nonneg, "features per split; 0 means round(sqrt(d))"),
        "min_samples_leaf": (int, 3, _ge(1), "minimum leaf size"),
    },
    "gb": {
        "n_stages": (int, 100, _ge(1), "boosting stages"),
        "max_depth": (int, 1, _ge(1), "tree depth"),
        "shrinkage": (float, 0.05, _pos, "shrinkage"),
        "min_samples_leaf": (int, 5, _ge(1), "minimum leaf size"),
    },
    "svm": {
        "C": (float, 0.05, _pos, "box constraint"),
        "tol": (float, 1e-6, _pos, "KKT tolerance"),
        "max_passes": (int, 20000, _ge(1), "SMO iteration cap"),
    },
    "ensemble": {
        "alpha": (float, 1.0, _nonneg, "error weight in the trade-off loss"),
        "beta": (float, 0.0, _nonneg, "diversity weight in the trade-off loss"),
        "simplex": (bool, True, _any, "restrict weights to the simplex"),
    },
    "stacking": {
        "k": (int, 5, _ge(2), "out-of-fold count"),
        "learning_rate": (float, 0.01, _pos, "base Adam step"),
        "epochs": (int, 5000, _ge(1), "maximum epochs"),
        "half_life": (float, 1000.0, _pos, "annealing half-life in steps"),
        "anneal": (bool, True, _any, "anneal the step size"),
        "window": (int, 10, _ge(1), "convergence window"),
    },
    "mi": {
        "bins": (int, 8, _ge(2), "histogram bins for continuous variables"),
        "permutations": (int, 199, _ge(99), "permutation count"),
        "q": (int, 0, _nonneg, "retained principal components; 0 keeps all"),
    },
    "bo": {
        "enabled": (bool, True, _any, "run the tuning stage"),
        "budget": (int, 20, _ge(3), "objective evaluations per seed"),
        "seeds": (int, 3, _ge(1), "independent tuning runs"),
        "policy": (str, "adaptive", _choice("random", "adaptive"), "restart policy"),
        "window": (int, 5, _ge(1), "stall window"),
        "delta": (float, 1e-3, _pos, "relative improvement threshold"),
        "gb_shrinkage_min": (float, 0.01, _pos, ""),
        "gb_shrinkage_max": (float, 0.5, _pos, ""),
        "gb_depth_min": (int, 1, _ge(1), ""),
        "gb_depth_max": (int, 4, _ge(1), ""),
        "rf_trees_min": (int, 10, _ge(1), ""),
        "rf_trees_max": (int, 200, _ge(1), ""),
        "svm_c_min": (float, 0.01, _pos, ""),
        "svm_c_max": (float, 100.0, _pos, ""),
    },
    "restart": {
        "enabled": (bool, True, _any, "run the restart benchmarks"),
        "trials": (int, 100, _ge(30), "benchmark trials"),
        "q": (float, 0.3, _frac, "global-basin share of the two-basin objective"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def out(self) -> Path:
        return Path(self.values["run"]["out"])

    def split_spec(self, offset: int = 0) -> SplitSpec:
        s = self.values["split"]
        return SplitSpec(s["train"], s["val"], s["test"], self.seed + offset)

    def learner_configs(self, seed: int) -> dict:
        b, r, g, v = (self.values[k] for k in ("bnn", "rf", "gb", "svm"))
        return {
            "BNN": BnnConfig(hidden=b["hidden"], prior_std=b["prior_std"],
                             learning_rate=b["learning_rate"], epochs=b["epochs"],
                             mc_train=b["mc_train"], n_mc=b["n_mc"], seed=seed),
            "RF": ForestConfig(n_trees=r["n_trees"], max_depth=r["max_depth"],
                               m_try=r["m_try"] or None,
                               min_samples_leaf=r["min_samples_leaf"], seed=seed),
            "GB": BoostConfig(n_stages=g["n_stages"], max_depth=g["max_depth"],
                              shrinkage=g["shrinkage"],
                              min_samples_leaf=g["min_samples_leaf"], seed=seed),
            "SVM": SvmConfig(C=v["C"], tol=v["tol"], max_passes=v["max_passes"], seed=seed),
        }

    def ensemble_config(self) -> EnsembleConfig:
        e = self.values["ensemble"]
        return EnsembleConfig(e["alpha"], e["beta"], e["simplex"])

    def meta_config(self, seed: int) -> MetaConfig:
        s = self.values["stacking"]
        return MetaConfig(learning_rate=s["learning_rate"], epochs=s["epochs"],
                          half_life=s["half_life"], anneal=s["anneal"], window=s["window"],
                          seed=seed)

    def search_space(self) -> SearchSpace:
        b = self.values["bo"]
        return SearchSpace((
            Dim("gb_shrinkage", b["gb_shrinkage_min"], b["gb_shrinkage_max"]),
            Dim("gb_depth", b["gb_depth_min"], b["gb_depth_max"], integer=True),
            Dim("rf_trees", b["rf_trees_min"], b["rf_trees_max"], integer=True),
            Dim("svm_C", b["svm_c_min"], b["svm_c_max"], log=True),
        ))

    def restart_policy(self) -> RestartPolicy:
        b = self.values["bo"]
        return RestartPolicy(b["policy"], b["window"], b["delta"])

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        vals = {k: dict(v) for k, v in self.values.items()}
        if seed is not None:
            vals["run"]["seed"] = seed
        if out is not None:
            vals["run"]["out"] = str(out)
        return replace(self, values=vals)


def _convert(typ, raw: str, path: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{path}: cannot read {raw!r} as {typ.__name__}") from None


def _validate(values: dict):
    for section, keys in SCHEMA.items():
        for key, (_, _, check, _) in keys.items():
            msg = check(values[section][key])
            if msg:
                raise ConfigError(f"{section}.{key}: {msg}")
    s = values["split"]
    if abs(s["train"] + s["val"] + s["test"] - 1.0) > 1e-9:
        raise ConfigError("split.train: train, val and test fractions must sum to 1")
    b = values["bo"]
    for lo, hi in (("gb_shrinkage_min", "gb_shrinkage_max"), ("gb_depth_min", "gb_depth_max"),
                   ("rf_trees_min", "rf_trees_max"), ("svm_c_min", "svm_c_max")):
        if not b[lo] < b[hi]:
            raise ConfigError(f"bo.{lo}: must be below bo.{hi}")
    path = values["data"]["path"]
    if path and not Path(path).is_file():
        raise ConfigError(f"data.path: file {path!r} does not exist")


def parse_config(text: str = "") -> ExperimentConfig:
    """Parse INI text over the defaults. Unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax: {exc}") from None
    values = {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            values[section][key] = _convert(SCHEMA[section][key][0], raw, f"{section}.{key}")
    _validate(values)
    return ExperimentConfig(values)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return parse_config(text)


def default_config_text() -> str:
    """The full default configuration, one commented key per line."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (typ, default, _, doc) in keys.items():
            if doc:
                lines.append(f"# {doc}")
            val = str(default).lower() if typ is bool else default
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)
