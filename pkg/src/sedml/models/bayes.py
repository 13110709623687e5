"""Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np

from .linear import softmax


class GaussianNB:
    """Per-class diagonal Gaussians.

    Every class variance is inflated by ``var_smoothing`` times the largest
    feature variance so that constant features do not blow up the likelihood.
    """

    def __init__(self, var_smoothing: float = 1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y_idx, n_classes):
        X = np.asarray(X, dtype=np.float64)
        eps = self.var_smoothing * X.var(axis=0).max()
        self.theta_ = np.zeros((n_classes, X.shape[1]))
        self.var_ = np.ones((n_classes, X.shape[1]))
        self.class_prior_ = np.zeros(n_classes)
        for c in range(n_classes):
            Xc = X[y_idx == c]
            if Xc.shape[0] == 0:
                continue
            self.theta_[c] = Xc.mean(axis=0)
            self.var_[c] = Xc.var(axis=0) + eps
            self.class_prior_[c] = Xc.shape[0] / X.shape[0]
        if eps == 0:
            self.var_ = np.where(self.var_ == 0, 1.0, self.var_)
        return self

    def joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.class_prior_)
        ll = -0.5 * np.sum(np.log(2 * np.pi * self.var_), axis=1)
        diff = X[:, None, :] - self.theta_[None, :, :]
        ll = ll[None, :] - 0.5 * np.sum(diff**2 / self.var_[None], axis=2)
        return ll + log_prior

    def predict_proba(self, X):
        return softmax(self.joint_log_likelihood(X))

    def predict_index(self, X):
        return np.argmax(self.joint_log_likelihood(X), axis=1)

    def get_state(self):
        return {"theta": self.theta_.tolist(), "var": self.var_.tolist(), "prior": self.class_prior_.tolist()}

    def set_state(self, st):
        self.theta_ = np.asarray(st["theta"], dtype=np.float64)
        self.var_ = np.asarray(st["var"], dtype=np.float64)
        self.class_prior_ = np.asarray(st["prior"], dtype=np.float64)
        return self
