"""The four classifiers (ANN, ANN+EA, Gaussian SVM, AdaBoost) and dataset splitting."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .ann import AnnModel, EaState, ea_refine, momentum_increment, train_ann
from .boost import MH, SAMME, BoostModel, Stump, VoteStump, best_stump, best_vote_stump, samme_alpha, train_adaboost
from .data import Dataset, LabeledExample, SplitDataset, accuracy, split
from .svm import SvmModel, train_svm

ANN, ANN_EA, SVM, ADABOOST = "ANN", "ANN+EA", "SVM", "AdaBoost"
ALGORITHMS = (ANN, ANN_EA, SVM, ADABOOST)

DEFAULTS = {
    ANN: {"n_h": 10},
    ANN_EA: {"n_h": 10, "m": 0.5, "g": 0.05, "generations": 20},
    SVM: {"gamma": None, "cbox": 10.0},
    ADABOOST: {"T": 50, "variant": MH},
}


def predict(model, x):
    """Class label(s) for one feature vector or a 2-D batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != model.n_features:
        raise ConfigError(f"model expects {model.n_features} features, got {X.shape[1]}")
    out = model.predict(X)
    return int(out[0]) if single else out


def train(algorithm: str, split: SplitDataset, seed: int = 0, n_classes: int | None = None, **params):
    """Train ``algorithm`` with ``params`` merged over its defaults."""
    if algorithm not in DEFAULTS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    unknown = set(params) - set(DEFAULTS[algorithm])
    if unknown:
        raise ConfigError(f"unknown {algorithm} parameter(s): {sorted(unknown)}")
    p = {**DEFAULTS[algorithm], **params}
    if algorithm == ANN:
        return train_ann(split, int(p["n_h"]), seed, n_classes=n_classes)
    if algorithm == ANN_EA:
        base = train_ann(split, int(p["n_h"]), seed, n_classes=n_classes)
        return ea_refine(base, split, float(p["m"]), float(p["g"]), int(p["generations"]), seed)
    if algorithm == SVM:
        return train_svm(split, p["gamma"], float(p["cbox"]), n_classes=n_classes)
    return train_adaboost(split, int(p["T"]), seed, n_classes=n_classes, variant=str(p["variant"]))


__all__ = [
    "ALGORITHMS", "ANN", "ANN_EA", "SVM", "ADABOOST", "DEFAULTS",
    "AnnModel", "EaState", "SvmModel", "BoostModel", "Stump", "VoteStump", "SAMME", "MH",
    "Dataset", "LabeledExample", "SplitDataset",
    "split", "train", "train_ann", "ea_refine", "train_svm", "train_adaboost", "predict",
    "momentum_increment", "best_stump", "best_vote_stump", "samme_alpha", "accuracy",
]
