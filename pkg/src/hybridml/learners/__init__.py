"""The four base learners behind one probability interface."""

from ._common import LearnerError, sigmoid
from .bnn import (
    BnnConfig,
    BnnModel,
    BnnTrainingError,
    UncertaintyReport,
    bnn_output_density,
    bnn_predict_samples,
    bnn_train,
    bnn_uncertainty,
    epistemic_shrinkage_probe,
    ks_degeneracy_check,
)
from .boosting import BoostConfig, GbmModel, gb_train
from .forest import (
    ForestConfig,
    ForestModel,
    gini_impurity,
    rf_error_bound,
    rf_feature_importance,
    rf_train,
)
from .persistence import load_model, model_from_text, model_to_text, save_model
from .svm import SvmConfig, SvmModel, svm_margin, svm_train

LEARNER_NAMES = ("BNN", "RF", "GB", "SVM")


def predict(model, X):
    """Class-1 probabilities in [0, 1] from any trained learner."""
    return model.predict_proba(X)


def train_learner(name: str, X, y, cfg):
    trainers = {"BNN": bnn_train, "RF": rf_train, "GB": gb_train, "SVM": svm_train}
    try:
        return trainers[name](X, y, cfg)
    except KeyError:
        raise LearnerError(f"unknown learner {name!r}; expected one of {LEARNER_NAMES}") from None


__all__ = [
    "LEARNER_NAMES", "BnnConfig", "BnnModel", "BnnTrainingError", "BoostConfig",
    "ForestConfig", "ForestModel", "GbmModel", "LearnerError", "SvmConfig", "SvmModel",
    "UncertaintyReport", "bnn_output_density", "bnn_predict_samples", "bnn_train",
    "bnn_uncertainty", "epistemic_shrinkage_probe", "gb_train", "gini_impurity",
    "ks_degeneracy_check", "load_model", "model_from_text", "model_to_text", "predict",
    "rf_error_bound", "rf_feature_importance", "rf_train", "save_model", "sigmoid",
    "svm_margin", "svm_train", "train_learner",
]
