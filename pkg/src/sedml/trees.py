"""Array-backed CART and Extra-Trees.

Exhaustive CART grows depth-first from an explicit stack; Extra-Trees grows
level by level.  A sample goes left when
``x[feature] <= threshold``.  Exhaustive CART places thresholds on the largest
left-hand training value, never a midpoint, so a fitted tree routes any input
identically after a strictly increasing per-feature transform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class TreeArrays:
    feature: np.ndarray  # LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
        )


def _best_exhaustive(X, Y, min_leaf, criterion):
    """Best (feature, threshold) over all features, or None.

    ``Y`` is (m, K) one-hot for gini, (m, 1) centred targets for mse.
    """
    m, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    valid = Xs[:-1] < Xs[1:]  # (m-1, p): split between distinct values only
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    if criterion == "gini":
        counts = np.cumsum(Y[order], axis=0)[:-1]  # (m-1, p, K)
        total = Y.sum(axis=0)
        right = total - counts
        purity = (counts**2).sum(axis=2) / nl + (right**2).sum(axis=2) / nr
        cost = -purity
    else:
        y = Y[:, 0]
        ys = y[order]
        s = np.cumsum(ys, axis=0)[:-1]
        s2 = np.cumsum(ys * ys, axis=0)[:-1]
        tot, tot2 = y.sum(), (y * y).sum()
        cost = (s2 - s * s / nl) + ((tot2 - s2) - (tot - s) ** 2 / nr)
    cost = np.where(valid, cost, np.inf).T
    # the running-sum costs carry roundoff, so equal partitions reached through
    # different features can differ in the last bits; treat those as ties
    best = cost.min()
    tied = cost <= best + 1e-9 * max(1.0, abs(best))
    # feature-major flattening: ties go to the lowest feature, then lowest threshold
    flat = int(np.argmax(tied))
    f, i = divmod(flat, m - 1)
    return f, float(Xs[i, f])


def grow_random_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    max_features: int,
    min_samples_leaf: int = 1,
    max_depth: int | None = None,
    min_samples_split: int = 2,
) -> TreeArrays:
    """Extra-Trees regression tree, grown one depth level at a time.

    Every open node draws one uniform threshold in its own range for each of
    ``max_features`` randomly chosen non-constant features and keeps the
    draw with the largest variance reduction.  All nodes on a level are
    handled together with segment reductions over node-sorted samples.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = X.shape
    max_depth = np.inf if max_depth is None else max_depth
    min_size = max(min_samples_split, 2 * min_samples_leaf)
    feature, threshold, left, right, value = [LEAF], [0.0], [LEAF], [LEAF], [y.mean()]
    # samples sorted so each open node owns one contiguous segment
    order = np.arange(n)
    nodes, starts, sizes = np.array([0]), np.array([0]), np.array([n])
    depth = 0
    while nodes.size and depth < max_depth:
        keep = sizes >= min_size
        if not keep.all():
            seg = np.repeat(keep, sizes)
            order, nodes, sizes = order[seg], nodes[keep], sizes[keep]
            if not nodes.size:
                break
            starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        Xs, ys = X[order], y[order]
        owner = np.repeat(np.arange(nodes.size), sizes)
        lo = np.minimum.reduceat(Xs, starts, axis=0)
        hi = np.maximum.reduceat(Xs, starts, axis=0)
        mean = np.add.reduceat(ys, starts) / sizes
        yc = ys - mean[owner]
        open_ = np.maximum.reduceat(np.abs(yc), starts) > 1e-12 * (1.0 + np.abs(mean))
        usable = hi > lo
        keys = np.where(usable, rng.random((nodes.size, p)), np.inf)
        if max_features < p:
            rank = np.argsort(np.argsort(keys, axis=1), axis=1)
            usable &= rank < max_features
        thr = lo + rng.random((nodes.size, p)) * (hi - lo)
        goes_left = Xs <= thr[owner]
        nl = np.add.reduceat(goes_left.astype(np.float64), starts, axis=0)
        nr = sizes[:, None] - nl
        sl = np.add.reduceat(goes_left * yc[:, None], starts, axis=0)
        # yc sums to zero per node, so the right-hand sum is -sl
        gain = sl * sl * (1.0 / np.maximum(nl, 1.0) + 1.0 / np.maximum(nr, 1.0))
        ok = usable & (nl >= min_samples_leaf) & (nr >= min_samples_leaf) & open_[:, None]
        gain[~ok] = -np.inf
        best = np.argmax(gain, axis=1)
        split = np.isfinite(gain[np.arange(nodes.size), best])
        if not split.any():
            break
        side = goes_left[np.arange(order.size), best[owner]]
        chosen = np.flatnonzero(split)
        base = len(feature)
        for i, s in enumerate(chosen):
            f = int(best[s])
            feature[nodes[s]], threshold[nodes[s]] = f, float(thr[s, f])
            left[nodes[s]], right[nodes[s]] = base + 2 * i, base + 2 * i + 1
        rank_in_split = np.cumsum(split) - 1
        in_split = split[owner]
        child = 2 * rank_in_split[owner[in_split]] + (~side[in_split])
        sizes = np.bincount(child, minlength=2 * chosen.size)
        means = np.bincount(child, weights=ys[in_split], minlength=2 * chosen.size) / sizes
        k = 2 * chosen.size
        feature.extend([LEAF] * k)
        threshold.extend([0.0] * k)
        left.extend([LEAF] * k)
        right.extend([LEAF] * k)
        value.extend(means.tolist())
        order = order[in_split][np.argsort(child, kind="stable")]
        nodes = np.arange(base, base + k)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        depth += 1
    return TreeArrays(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64).reshape(-1, 1),
    )


def grow_tree(
    X: np.ndarray,
    Y: np.ndarray,
    criterion: str,
    max_depth: int | None,
    min_samples_leaf: int,
    min_samples_split: int = 2,
) -> TreeArrays:
    """Grow one exhaustive CART tree.

    For ``criterion="gini"`` ``Y`` is a one-hot matrix and leaf values are
    class frequencies; for ``"mse"`` ``Y`` is a column of targets and leaves
    hold means.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    max_depth = np.inf if max_depth is None else max_depth
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(Y[idx].sum(axis=0) / idx.size)
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        m = idx.size
        if depth >= max_depth or m < max(min_samples_split, 2 * min_samples_leaf):
            continue
        Yn = Y[idx]
        if criterion == "gini":
            if (Yn.sum(axis=0) > 0).sum() <= 1:
                continue
        else:
            Yn = Yn - Yn.mean(axis=0)
            if np.all(np.abs(Yn) <= 1e-12 * (1.0 + np.abs(Y[idx]).max())):
                continue
        Xn = X[idx]
        split = _best_exhaustive(Xn, Yn, min_samples_leaf, criterion)
        if split is None:
            continue
        f, t = split
        go_left = Xn[:, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # push right first so the left subtree gets the lower node ids
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return TreeArrays(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.vstack(value),
    )


class DecisionTreeRegressor:
    """CART regressor with variance-reduction splits."""

    def __init__(self, max_depth: int | None = 12, min_samples_leaf: int = 3):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        self.tree_ = grow_tree(X, y, "mse", self.max_depth, self.min_samples_leaf)
        return self

    def predict(self, X):
        return self.tree_.predict_value(np.asarray(X, dtype=np.float64))[:, 0]


class ExtraTreesRegressor:
    """Extremely randomized trees, averaged.

    Each tree sees the full sample (no bootstrap).  Per-tree generators are
    spawned from ``seed`` so the ensemble does not depend on fit order.
    """

    def __init__(
        self,
        n_estimators: int = 10,
        max_features: float | int | None = None,
        min_samples_leaf: int = 1,
        max_depth: int | None = None,
        seed: int = 0,
    ):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.seed = seed

    def _n_features(self, p: int) -> int:
        mf = self.max_features
        if mf is None:
            return p
        if isinstance(mf, float):
            return max(1, int(round(mf * p)))
        return max(1, min(int(mf), p))

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        children = np.random.SeedSequence(self.seed).spawn(self.n_estimators)
        k = self._n_features(X.shape[1])
        self.trees_ = [
            grow_random_tree(X, y, np.random.default_rng(ss), k, self.min_samples_leaf, self.max_depth)
            for ss in children
        ]
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.predict_value(X)[:, 0] for t in self.trees_], axis=0)
