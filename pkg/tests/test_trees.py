import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sedml.trees import LEAF, DecisionTreeRegressor, ExtraTreesRegressor, TreeArrays, grow_random_tree, grow_tree


def first_within_roundoff(candidates):
    """Earliest (feature, threshold) whose cost ties the minimum up to roundoff."""
    best = min(c for c, _ in candidates)
    return next(split for c, split in candidates if c <= best + 1e-9 * max(1.0, abs(best)))


def naive_best_split(X, y, min_leaf):
    """Loop over every feature and every distinct left-hand value."""
    candidates = []
    for f in range(X.shape[1]):
        for t in np.unique(X[:, f])[:-1]:
            left = X[:, f] <= t
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
            candidates.append((sse, (f, t)))
    return first_within_roundoff(candidates)


@settings(max_examples=40)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_root_split_matches_naive_search(seed, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 3))
    y = np.sin(2 * X[:, 0]) + X[:, 1] ** 2
    tree = grow_tree(X, y, "mse", max_depth=1, min_samples_leaf=min_leaf)
    f, t = naive_best_split(X, y, min_leaf)
    assert (tree.feature[0], tree.threshold[0]) == (f, t)


def test_gini_root_split_matches_naive_search():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((20, 2))
    y_idx = (X[:, 1] > 0.2).astype(int)
    tree = grow_tree(X, np.eye(2)[y_idx], "gini", max_depth=1, min_samples_leaf=1)
    candidates = []
    for f in range(2):
        for t in np.unique(X[:, f])[:-1]:
            left = X[:, f] <= t
            impurity = 0.0
            for part in (left, ~left):
                freq = np.bincount(y_idx[part], minlength=2) / part.sum()
                impurity += part.sum() * (1 - freq @ freq)
            candidates.append((impurity, (f, t)))
    assert (tree.feature[0], tree.threshold[0]) == first_within_roundoff(candidates)
    assert tree.n_nodes == 3 and np.allclose(tree.value.sum(axis=1), 1.0)


def test_thresholds_are_training_values():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (30, 2))
    tree = grow_tree(X, X[:, 0] * 3 - X[:, 1], "mse", None, 1)
    for node in np.flatnonzero(tree.feature != LEAF):
        assert tree.threshold[node] in X[:, tree.feature[node]]


def test_matches_reference_regressor_on_training_points():
    from sklearn.tree import DecisionTreeRegressor as SkTree

    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 3))
    y = X[:, 0] * X[:, 1] + 0.1 * rng.standard_normal(60)
    ours = DecisionTreeRegressor(max_depth=4, min_samples_leaf=2).fit(X, y)
    ref = SkTree(max_depth=4, min_samples_leaf=2, random_state=0).fit(X, y)
    # the reference splits at midpoints, which routes training rows identically
    assert np.allclose(ours.predict(X), ref.predict(X), atol=1e-12)


@pytest.mark.parametrize("make", [
    lambda: DecisionTreeRegressor(max_depth=None, min_samples_leaf=1),
    lambda: ExtraTreesRegressor(n_estimators=4, seed=0),
])
def test_fully_grown_trees_interpolate_distinct_rows(make):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    assert np.allclose(make().fit(X, y).predict(X), y, atol=1e-12)


def test_depth_and_leaf_size_limits():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 3))
    y = rng.standard_normal(80)
    assert grow_tree(X, y, "mse", 3, 1).depth() <= 3
    tree = grow_tree(X, y, "mse", None, 7)
    leaves = tree.apply(X)
    assert np.bincount(leaves)[np.unique(leaves)].min() >= 7
    et = grow_random_tree(X, y, np.random.default_rng(0), 3, min_samples_leaf=5, max_depth=4)
    assert et.depth() <= 4
    assert np.bincount(et.apply(X))[np.unique(et.apply(X))].min() >= 5


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_extra_tree_leaves_hold_their_training_means(seed, max_features):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 5, (25, 3))
    y = X @ [1.0, -1.0, 0.5]
    tree = grow_random_tree(X, y, np.random.default_rng(seed + 1), max_features, min_samples_leaf=2)
    leaves = tree.apply(X)
    for leaf in np.unique(leaves):
        assert tree.feature[leaf] == LEAF
        assert tree.value[leaf, 0] == pytest.approx(y[leaves == leaf].mean(), abs=1e-9)


def test_extra_trees_determinism_and_range():
    rng = np.random.default_rng(6)
    X, y = rng.standard_normal((50, 4)), rng.uniform(-3, 3, 50)
    probe = rng.standard_normal((20, 4)) * 3
    a = ExtraTreesRegressor(n_estimators=5, seed=1, min_samples_leaf=3).fit(X, y).predict(probe)
    b = ExtraTreesRegressor(n_estimators=5, seed=1, min_samples_leaf=3).fit(X, y).predict(probe)
    c = ExtraTreesRegressor(n_estimators=5, seed=2, min_samples_leaf=3).fit(X, y).predict(probe)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.all((a >= y.min()) & (a <= y.max()))


def test_constant_target_gives_a_single_leaf():
    X = np.arange(10.0).reshape(5, 2)
    assert grow_tree(X, np.full(5, 2.5), "mse", None, 1).n_nodes == 1
    assert grow_random_tree(X, np.full(5, 2.5), np.random.default_rng(0), 2).n_nodes == 1


def test_tree_serialisation_round_trip():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((30, 2))
    tree = grow_tree(X, np.eye(3)[rng.integers(0, 3, 30)], "gini", 4, 1)
    back = TreeArrays.from_dict(tree.to_dict())
    assert np.array_equal(back.predict_value(X), tree.predict_value(X))
