"""Multinomial logistic regression and one-vs-rest linear SVM."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import minimize

from ..errors import ConvergenceWarning


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


class LogisticRegression:
    """Softmax regression with an L2 penalty ``||W||^2 / (2 C n)`` on the
    mean cross-entropy; biases are unpenalised.  Solved with L-BFGS to a
    projected-gradient tolerance of ``tol``.

    Prediction takes the arg-max score; exact ties resolve to the earliest
    class in the sorted alphabet.
    """

    def __init__(self, C: float = 1.0, tol: float = 1e-6, max_iter: int = 2000):
        if not C > 0:
            raise ValueError("C must be > 0")
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def _loss_grad(self, theta, X, Y, lam):
        n, p = X.shape
        K = Y.shape[1]
        W = theta[: p * K].reshape(p, K)
        b = theta[p * K :]
        Z = X @ W + b
        Z = Z - Z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(Z).sum(axis=1))
        loss = float(np.mean(logsum - (Z * Y).sum(axis=1)) + 0.5 * lam * (W * W).sum())
        P = np.exp(Z - logsum[:, None])
        D = (P - Y) / n
        gW = X.T @ D + lam * W
        gb = D.sum(axis=0)
        return loss, np.concatenate([gW.ravel(), gb])

    def fit(self, X, y_idx, n_classes):
        X = np.asarray(X, dtype=np.float64)
        n, p = X.shape
        Y = np.eye(n_classes)[y_idx]
        lam = 1.0 / (self.C * n)
        theta0 = np.zeros(p * n_classes + n_classes)
        res = minimize(
            self._loss_grad, theta0, args=(X, Y, lam), jac=True, method="L-BFGS-B",
            options={"gtol": self.tol, "maxiter": self.max_iter, "ftol": 1e-15},
        )
        gnorm = float(np.max(np.abs(res.jac)))
        if gnorm > self.tol * 10:
            warnings.warn(f"logistic regression stopped with gradient norm {gnorm:.2g}", ConvergenceWarning, stacklevel=2)
        self.coef_ = res.x[: p * n_classes].reshape(p, n_classes)
        self.intercept_ = res.x[p * n_classes :]
        self.grad_norm_ = gnorm
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict_index(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_.tolist()}

    def set_state(self, st):
        self.coef_ = np.asarray(st["coef"], dtype=np.float64)
        self.intercept_ = np.asarray(st["intercept"], dtype=np.float64)
        return self


class LinearSVM:
    """One-vs-rest hinge loss with L2 regularisation.

    Each binary problem minimises ``lam/2 ||w||^2 + mean(max(0, 1 - y(w.x + b)))``
    with ``lam = 1 / (C n)`` by full-batch subgradient descent, step
    ``eta0 / sqrt(t)``.  The iterate with the lowest objective is kept.
    """

    def __init__(self, C: float = 1.0, max_iter: int = 1000, eta0: float = 1.0):
        if not C > 0:
            raise ValueError("C must be > 0")
        self.C = C
        self.max_iter = max_iter
        self.eta0 = eta0

    def _fit_binary(self, X, y, lam):
        n, p = X.shape
        w, b = np.zeros(p), 0.0
        best = (np.inf, w.copy(), b)
        for t in range(1, self.max_iter + 1):
            margin = y * (X @ w + b)
            viol = margin < 1
            obj = 0.5 * lam * (w @ w) + np.maximum(0.0, 1 - margin).mean()
            if obj < best[0]:
                best = (obj, w.copy(), b)
            gw = lam * w - (y[viol] @ X[viol]) / n
            gb = -y[viol].sum() / n
            eta = self.eta0 / np.sqrt(t)
            w = w - eta * gw
            b = b - eta * gb
        margin = y * (X @ w + b)
        obj = 0.5 * lam * (w @ w) + np.maximum(0.0, 1 - margin).mean()
        if obj < best[0]:
            best = (obj, w.copy(), b)
        return best

    def fit(self, X, y_idx, n_classes):
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        lam = 1.0 / (self.C * n)
        W, B, objs = [], [], []
        for c in range(n_classes):
            y = np.where(y_idx == c, 1.0, -1.0)
            obj, w, b = self._fit_binary(X, y, lam)
            W.append(w)
            B.append(b)
            objs.append(obj)
        self.coef_ = np.array(W).T
        self.intercept_ = np.array(B)
        self.objective_ = np.array(objs)
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict_index(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_.tolist()}

    def set_state(self, st):
        self.coef_ = np.asarray(st["coef"], dtype=np.float64)
        self.intercept_ = np.asarray(st["intercept"], dtype=np.float64)
        return self
