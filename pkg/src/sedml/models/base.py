"""Classifier specs, the fit/predict entry points and model files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..datamodel import DataError, DataMatrix, LabeledDataset
from ..preprocess import ScalerParams
from .bayes import GaussianNB
from .linear import LinearSVM, LogisticRegression
from .mlp import MLPClassifier
from .neighbors import KNeighborsClassifier
from .svm import KernelSVC
from .tree import DecisionTreeClassifier

MODEL_FORMAT = "sedml-model"
MODEL_VERSION = 1


class SingleClassTrainingError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class ConstantClassifier:
    """Predicts one fixed class: the named ``constant`` or, by default, the
    most frequent training class (ties to the earliest)."""

    def __init__(self, constant: str | None = None):
        self.constant = constant

    def fit(self, X, y_idx, n_classes, classes=None):
        if self.constant is not None:
            self.index_ = list(classes).index(self.constant)
        else:
            self.index_ = int(np.argmax(np.bincount(y_idx, minlength=n_classes)))
        return self

    def predict_index(self, X):
        return np.full(np.asarray(X).shape[0], self.index_, dtype=np.int64)

    def get_state(self):
        return {"index": self.index_}

    def set_state(self, st):
        self.index_ = st["index"]
        return self


def _svc_c(C=1.0, gamma="scale", kernel="rbf", tol=1e-3, max_iter=None):
    return KernelSVC("C", C=C, gamma=gamma, kernel=kernel, tol=tol, max_iter=max_iter)


def _svc_nu(nu=0.5, gamma="scale", kernel="rbf", tol=1e-3, max_iter=None):
    return KernelSVC("nu", nu=nu, gamma=gamma, kernel=kernel, tol=tol, max_iter=max_iter)


# kind -> (factory, default hyperparameters, takes a seed)
REGISTRY: dict[str, tuple[Any, dict, bool]] = {
    "Logistic": (LogisticRegression, {"C": 1.0, "tol": 1e-6, "max_iter": 2000}, False),
    "GaussianNB": (GaussianNB, {"var_smoothing": 1e-9}, False),
    "DecisionTree": (DecisionTreeClassifier, {"max_depth": 10, "min_samples_leaf": 2}, False),
    "KNN": (KNeighborsClassifier, {"k": 5}, False),
    "LinearSVM": (LinearSVM, {"C": 1.0, "max_iter": 1000, "eta0": 1.0}, False),
    "KernelSVM-C": (_svc_c, {"C": 1.0, "gamma": "scale", "kernel": "rbf", "tol": 1e-3, "max_iter": None}, False),
    "KernelSVM-Nu": (_svc_nu, {"nu": 0.5, "gamma": "scale", "kernel": "rbf", "tol": 1e-3, "max_iter": None}, False),
    "MLP": (
        MLPClassifier,
        {
            "hidden_layers": [100],
            "activation": "relu",
            "dropout_rate": 0.0,
            "batch_norm": False,
            "optimizer": "adam",
            "learning_rate": 1e-3,
            "epochs": 60,
            "batch_size": 32,
            "l2": 0.0,
        },
        True,
    ),
    "Constant": (ConstantClassifier, {"constant": None}, False),
}

DNN_HIDDEN = (200, 400, 300, 100, 50)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        if self.kind not in REGISTRY:
            raise ValueError(f"unknown classifier kind {self.kind!r}; choose from {sorted(REGISTRY)}")
        defaults = REGISTRY[self.kind][1]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.kind}: {sorted(unknown)}")
        hp = {**defaults, **self.hyperparameters}
        _validate(self.kind, hp)
        object.__setattr__(self, "hyperparameters", hp)

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def stochastic(self) -> bool:
        return REGISTRY[self.kind][2]

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, dict(self.hyperparameters), seed, self.name)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.hyperparameters, "seed": self.seed, "name": self.name}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(d["kind"], dict(d.get("hyperparameters", {})), int(d.get("seed", 0)), d.get("name"))

    def build(self):
        factory, _, seeded = REGISTRY[self.kind]
        kw = dict(self.hyperparameters)
        if seeded:
            kw["seed"] = self.seed
        return factory(**kw)


def _validate(kind: str, hp: dict) -> None:
    def positive(key):
        if not hp[key] > 0:
            raise ValueError(f"{kind}: {key} must be > 0, got {hp[key]}")

    if kind in ("Logistic", "LinearSVM", "KernelSVM-C"):
        positive("C")
    if kind == "KernelSVM-Nu" and not 0 < hp["nu"] < 1:
        raise ValueError(f"{kind}: nu must lie in (0, 1), got {hp['nu']}")
    if kind.startswith("KernelSVM") and hp["gamma"] != "scale":
        positive("gamma")
    if kind == "KNN" and hp["k"] < 1:
        raise ValueError("KNN: k must be >= 1")
    if kind == "MLP":
        if hp["epochs"] < 1:
            raise ValueError("MLP: epochs must be >= 1")
        positive("learning_rate")
        if not 0 <= hp["dropout_rate"] < 1:
            raise ValueError("MLP: dropout_rate must lie in [0, 1)")


def default_suite(seed: int = 0, epochs: int = 60) -> list[ClassifierSpec]:
    """The comparison line-up: six classical models, both SVM parameterisations
    and the five-hidden-layer DNN."""
    return [
        ClassifierSpec("Logistic", name="LogisticRegression"),
        ClassifierSpec("GaussianNB", name="GaussianNB"),
        ClassifierSpec("DecisionTree", name="DecisionTreeClassifier"),
        ClassifierSpec("KNN", name="KNeighborsClassifier"),
        ClassifierSpec("MLP", {"epochs": epochs}, seed=seed, name="MLPClassifier"),
        ClassifierSpec("LinearSVM", name="LinearSVC"),
        ClassifierSpec("KernelSVM-C", name="SVC"),
        ClassifierSpec("KernelSVM-Nu", name="NuSVC"),
        ClassifierSpec("MLP", {"hidden_layers": list(DNN_HIDDEN), "epochs": epochs}, seed=seed, name="DNN"),
    ]


@dataclass(eq=False)
class TrainedModel:
    spec: ClassifierSpec
    classes: tuple[str, ...]
    estimator: Any
    feature_names: tuple[str, ...]
    scaler: ScalerParams | None = None

    @property
    def history(self):
        return getattr(self.estimator, "history_", None)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, DataMatrix):
        if not features.is_complete:
            raise DataError("prediction needs fully observed features")
        return features.values
    return np.asarray(features, dtype=np.float64)


def fit(spec: ClassifierSpec, train: LabeledDataset, eval_set: LabeledDataset | None = None) -> TrainedModel:
    classes = train.classes
    if len(classes) < 2:
        raise SingleClassTrainingError(f"training data has a single class {classes}")
    y_idx = np.searchsorted(np.array(classes), train.labels)
    est = spec.build()
    if spec.kind == "MLP" and eval_set is not None:
        ye = np.array([classes.index(c) if c in classes else -1 for c in eval_set.labels])
        est.fit(train.X, y_idx, len(classes), eval_set=(eval_set.X, ye))
    elif spec.kind == "Constant":
        est.fit(train.X, y_idx, len(classes), classes=classes)
    else:
        est.fit(train.X, y_idx, len(classes))
    return TrainedModel(spec, classes, est, train.features.col_names)


def predict(model: TrainedModel, features) -> np.ndarray:
    X = _as_matrix(features)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatchError(f"model expects {model.n_features} features, got {X.shape[-1]}")
    return np.array(model.classes)[model.estimator.predict_index(X)]


def predict_proba(model: TrainedModel, features) -> np.ndarray:
    X = _as_matrix(features)
    if not hasattr(model.estimator, "predict_proba"):
        raise TypeError(f"{model.spec.kind} does not expose probabilities")
    return model.estimator.predict_proba(X)


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": model.spec.to_dict(),
        "classes": list(model.classes),
        "feature_names": list(model.feature_names),
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "state": model.estimator.get_state(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path} is not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model file version {doc.get('version')}")
    spec = ClassifierSpec.from_dict(doc["spec"])
    est = spec.build().set_state(doc["state"])
    scaler = ScalerParams.from_dict(doc["scaler"]) if doc.get("scaler") else None
    return TrainedModel(spec, tuple(doc["classes"]), est, tuple(doc["feature_names"]), scaler)
