"""k-nearest-neighbour classifier."""
from __future__ import annotations

import numpy as np


class KNeighborsClassifier:
    """Majority vote among the ``k`` nearest training rows (Euclidean).

    Distance ties between candidate neighbours go to the lower training
    index.  Vote ties go to the class whose voters are closer in total, then
    to the earlier class.
    """

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k

    def fit(self, X, y_idx, n_classes):
        self.X_ = np.array(X, dtype=np.float64)
        self.y_ = np.asarray(y_idx, dtype=np.int64)
        self.n_classes_ = n_classes
        if self.k > self.X_.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {self.X_.shape[0]} training rows")
        return self

    def kneighbors(self, X):
        X = np.asarray(X, dtype=np.float64)
        # direct differences rather than the Gram expansion: exact zeros for duplicates
        d = np.empty((X.shape[0], self.X_.shape[0]))
        for s in range(0, X.shape[0], 128):
            diff = X[s : s + 128, None, :] - self.X_[None, :, :]
            d[s : s + 128] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        idx = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        return np.take_along_axis(d, idx, axis=1), idx

    def predict_index(self, X):
        dist, idx = self.kneighbors(X)
        labels = self.y_[idx]
        n = labels.shape[0]
        votes = np.zeros((n, self.n_classes_))
        dsum = np.zeros((n, self.n_classes_))
        rows = np.repeat(np.arange(n), self.k)
        np.add.at(votes, (rows, labels.ravel()), 1)
        np.add.at(dsum, (rows, labels.ravel()), dist.ravel())
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            top = np.flatnonzero(votes[i] == votes[i].max())
            out[i] = top[np.argmin(dsum[i, top])]
        return out

    def predict_proba(self, X):
        _, idx = self.kneighbors(X)
        labels = self.y_[idx]
        P = np.zeros((labels.shape[0], self.n_classes_))
        np.add.at(P, (np.repeat(np.arange(labels.shape[0]), self.k), labels.ravel()), 1.0 / self.k)
        return P

    def get_state(self):
        return {"X": self.X_.tolist(), "y": self.y_.tolist(), "n_classes": self.n_classes_}

    def set_state(self, st):
        self.X_ = np.asarray(st["X"], dtype=np.float64)
        self.y_ = np.asarray(st["y"], dtype=np.int64)
        self.n_classes_ = st["n_classes"]
        return self
