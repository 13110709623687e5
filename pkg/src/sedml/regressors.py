"""Regressors used by the round-robin imputer."""
from __future__ import annotations

import numpy as np

from .trees import DecisionTreeRegressor, ExtraTreesRegressor

__all__ = ["BayesianRidge", "DecisionTreeRegressor", "ExtraTreesRegressor", "make_regressor"]


class BayesianRidge:
    """Linear regression with a Gaussian prior on the weights.

    With ``fit_hyperparameters=True`` the noise precision ``alpha`` and the
    weight precision ``lambda_`` are re-estimated by evidence maximisation
    (MacKay's fixed-point updates under Gamma(1e-6, 1e-6) hyperpriors) for at
    most ``max_updates`` rounds.  Otherwise the supplied precisions are used
    as-is and the fit reduces to ridge regression with penalty
    ``lambda_ / alpha``.  The intercept is never penalised.
    """

    def __init__(
        self,
        fit_hyperparameters: bool = True,
        alpha: float = 1.0,
        lambda_: float = 1.0,
        max_updates: int = 50,
        tol: float = 1e-3,
        hyperprior: float = 1e-6,
    ):
        self.fit_hyperparameters = fit_hyperparameters
        self.alpha = alpha
        self.lambda_ = lambda_
        self.max_updates = max_updates
        self.tol = tol
        self.hyperprior = hyperprior

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = X.shape[0]
        x_mean, y_mean = X.mean(axis=0), y.mean()
        Xc, yc = X - x_mean, y - y_mean
        U, S, Vt = np.linalg.svd(Xc, full_matrices=False)
        eig = S**2
        Uty = U.T @ yc

        def solve(alpha, lam):
            return Vt.T @ (S / (eig + lam / alpha) * Uty)

        a0 = b0 = self.hyperprior
        if self.fit_hyperparameters:
            alpha = 1.0 / (np.var(yc) + np.finfo(float).eps)
            lam = 1.0
            coef = solve(alpha, lam)
            self.n_updates_ = 0
            for it in range(self.max_updates):
                sse = float(np.sum((yc - Xc @ coef) ** 2))
                gamma = float(np.sum(alpha * eig / (lam + alpha * eig)))
                lam = (gamma + 2 * a0) / (float(coef @ coef) + 2 * b0)
                alpha = (n - gamma + 2 * a0) / (sse + 2 * b0)
                new = solve(alpha, lam)
                self.n_updates_ = it + 1
                done = np.sum(np.abs(new - coef)) < self.tol
                coef = new
                if done:
                    break
        else:
            alpha, lam = self.alpha, self.lambda_
            coef = solve(alpha, lam)
        self.alpha_, self.lambda_fitted_ = alpha, lam
        self.coef_ = coef
        self.intercept_ = y_mean - x_mean @ coef
        return self

    def predict(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_


def make_regressor(name: str, n_trees: int = 10, seed: int = 0, **kw):
    if name == "BayesianRidge":
        return BayesianRidge(**kw)
    if name == "DecisionTree":
        return DecisionTreeRegressor(**kw)
    if name == "ExtraTrees":
        return ExtraTreesRegressor(n_estimators=n_trees, seed=seed, **kw)
    raise ValueError(f"unknown estimator {name!r}")
