"""CART classification tree (Gini impurity)."""
from __future__ import annotations

import numpy as np

from ..trees import TreeArrays, grow_tree


class DecisionTreeClassifier:
    """Exhaustive CART.

    Among equally good splits the lowest feature index wins, then the lowest
    threshold.  ``max_depth=None`` grows until leaves are pure or cannot be
    split under ``min_samples_leaf``.
    """

    def __init__(self, max_depth: int | None = 10, min_samples_leaf: int = 2):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y_idx, n_classes):
        Y = np.eye(n_classes)[y_idx]
        self.tree_ = grow_tree(X, Y, "gini", self.max_depth, self.min_samples_leaf)
        return self

    def predict_proba(self, X):
        return self.tree_.predict_value(np.asarray(X, dtype=np.float64))

    def predict_index(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def get_state(self):
        return self.tree_.to_dict()

    def set_state(self, st):
        self.tree_ = TreeArrays.from_dict(st)
        return self
