"""Classifier suite behind one fit/predict interface."""
from .base import (
    DNN_HIDDEN,
    REGISTRY,
    ClassifierSpec,
    ConstantClassifier,
    DimensionMismatchError,
    SingleClassTrainingError,
    TrainedModel,
    default_suite,
    fit,
    load_model,
    predict,
    predict_proba,
    save_model,
)
from .mlp import NetworkArchitecture, mlp_gradient_check

__all__ = [
    "DNN_HIDDEN",
    "REGISTRY",
    "ClassifierSpec",
    "ConstantClassifier",
    "DimensionMismatchError",
    "NetworkArchitecture",
    "SingleClassTrainingError",
    "TrainedModel",
    "default_suite",
    "fit",
    "load_model",
    "mlp_gradient_check",
    "predict",
    "predict_proba",
    "save_model",
]
