import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sedml.bench.synthetic import gaussian_classes
from sedml.datamodel import DataMatrix, LabeledDataset
from sedml.models import (
    REGISTRY,
    ClassifierSpec,
    DimensionMismatchError,
    SingleClassTrainingError,
    default_suite,
    fit,
    load_model,
    predict,
    predict_proba,
    save_model,
)
from sedml.models.linear import LinearSVM, LogisticRegression
from sedml.models.mlp import MLPClassifier, NetworkArchitecture, forward, init_params, loss_and_grads
from sedml.models.svm import DegenerateNuError, KernelSVC, solve_c_svc, rbf_kernel


def dataset(X, labels):
    return LabeledDataset(DataMatrix.from_array(np.asarray(X, dtype=float)), list(labels))


@pytest.fixture(scope="module")
def blobs():
    return gaussian_classes(30, 4, 3, separation=3.0, seed=11)


QUICK = {
    "MLP": {"hidden_layers": [8], "epochs": 3},
    "LinearSVM": {"max_iter": 100},
}
KINDS = sorted(REGISTRY)


def quick_spec(kind, seed=0):
    return ClassifierSpec(kind, dict(QUICK.get(kind, {})), seed=seed)


def test_knn_with_one_neighbour_memorises_training_rows(blobs):
    model = fit(ClassifierSpec("KNN", {"k": 1}), blobs)
    assert np.array_equal(predict(model, blobs.X), blobs.labels)


def test_gaussian_nb_on_well_separated_classes():
    ds = gaussian_classes(100, 5, 2, separation=6.0, seed=4)
    model = fit(ClassifierSpec("GaussianNB"), ds)
    assert np.mean(predict(model, ds.X) == ds.labels) >= 0.99


def test_gaussian_nb_matches_reference_implementation(blobs):
    from sklearn.naive_bayes import GaussianNB as SkGaussianNB

    model = fit(ClassifierSpec("GaussianNB"), blobs)
    ref = SkGaussianNB().fit(blobs.X, blobs.labels)
    assert np.allclose(predict_proba(model, blobs.X), ref.predict_proba(blobs.X), atol=1e-9)


def test_unlimited_tree_fits_distinct_rows_exactly(blobs):
    model = fit(ClassifierSpec("DecisionTree", {"max_depth": None, "min_samples_leaf": 1}), blobs)
    assert np.array_equal(predict(model, blobs.X), blobs.labels)


def test_zero_weight_logistic_ties_to_first_class():
    lr = LogisticRegression().set_state({"coef": np.zeros((2, 3)), "intercept": np.zeros(3)})
    X = np.random.default_rng(0).standard_normal((5, 2))
    assert lr.predict_index(X).tolist() == [0] * 5
    assert np.allclose(lr.predict_proba(X), 1 / 3)
    lr.set_state({"coef": np.zeros((2, 3)), "intercept": [0.0, 0.0, 1e-12]})
    assert lr.predict_index(X).tolist() == [2] * 5


def test_logistic_matches_reference_implementation(blobs):
    from sklearn.linear_model import LogisticRegression as SkLogistic

    y = np.searchsorted(np.array(blobs.classes), blobs.labels)
    ours = LogisticRegression(C=0.5, tol=1e-9).fit(blobs.X, y, 3)
    ref = SkLogistic(C=0.5, tol=1e-10, max_iter=10_000).fit(blobs.X, y)
    # softmax parameters are identified only up to a common shift across classes
    ours_w = ours.coef_ - ours.coef_.mean(axis=1, keepdims=True)
    ref_w = ref.coef_.T - ref.coef_.T.mean(axis=1, keepdims=True)
    assert np.allclose(ours_w, ref_w, atol=1e-4)
    assert np.allclose(ours.predict_proba(blobs.X), ref.predict_proba(blobs.X), atol=1e-5)


def test_symmetric_network_gives_identical_unit_gradients():
    arch = NetworkArchitecture((3, 4, 2), activation="tanh")
    # all-zero weights give all-zero gradients; a shared constant is the informative case
    params = {k: np.full_like(v, 0.3) for k, v in init_params(arch, np.random.default_rng(0)).items()}
    X = np.random.default_rng(1).standard_normal((6, 3))
    _, grads = loss_and_grads(params, arch, X, np.array([0, 1, 0, 1, 1, 0]))
    # every hidden unit computes the same function, so none can be told apart
    assert np.allclose(grads["W0"], grads["W0"][:, :1]) and np.abs(grads["W0"]).max() > 0
    assert np.allclose(grads["b0"], grads["b0"][0])
    assert np.allclose(grads["W1"], grads["W1"][:1, :])


@pytest.mark.parametrize("kind", ["Logistic", "GaussianNB", "DecisionTree", "KNN", "MLP"])
def test_probabilities_sum_to_one(kind, blobs):
    model = fit(quick_spec(kind), blobs)
    P = predict_proba(model, blobs.X)
    assert P.shape == (len(blobs), 3)
    assert np.all(P >= 0) and np.allclose(P.sum(axis=1), 1.0, atol=1e-9)


def test_predict_proba_missing_for_margin_models(blobs):
    with pytest.raises(TypeError):
        predict_proba(fit(ClassifierSpec("KernelSVM-C"), blobs), blobs.X)


def test_dropout_free_network_has_identical_train_and_eval_passes():
    arch = NetworkArchitecture((4, 6, 5, 3), dropout_rate=0.0)
    params = init_params(arch, np.random.default_rng(2))
    X = np.random.default_rng(3).standard_normal((7, 4))
    train_logits, _ = forward(params, arch, X, True, rng=np.random.default_rng(0))
    eval_logits, _ = forward(params, arch, X, False)
    assert np.array_equal(train_logits, eval_logits)


def test_dropout_changes_only_the_training_pass():
    arch = NetworkArchitecture((4, 6, 3), dropout_rate=0.5)
    params = init_params(arch, np.random.default_rng(2))
    X = np.random.default_rng(3).standard_normal((7, 4))
    train_logits, _ = forward(params, arch, X, True, rng=np.random.default_rng(0))
    eval_logits, _ = forward(params, arch, X, False)
    again, _ = forward(params, arch, X, False)
    assert not np.allclose(train_logits, eval_logits) and np.array_equal(eval_logits, again)


@pytest.mark.parametrize("formulation", ["C", "nu"])
def test_svm_dual_feasibility(formulation, blobs):
    y = np.searchsorted(np.array(blobs.classes), blobs.labels)
    svm = KernelSVC(formulation, C=2.0, nu=0.4).fit(blobs.X, y, 3)
    for audit in svm.dual_audit(blobs.X):
        assert audit["alpha_min"] >= 0.0
        assert audit["alpha_max"] <= audit["upper"] + 1e-12
        assert audit["equality_residual"] < 1e-9
        if formulation == "nu":
            # the nu problem also pins the multiplier total to nu * l
            assert audit["alpha_sum"] == pytest.approx(0.4 * audit["n"], abs=1e-9)


@pytest.mark.parametrize("formulation", ["C", "nu"])
def test_svm_decision_values_match_reference_implementation(formulation, blobs):
    from sklearn.svm import SVC, NuSVC

    two = [i for i, c in enumerate(blobs.labels) if c != "C"]
    X, labels = blobs.X[two], blobs.labels[two]
    y = (labels == "B").astype(int)
    tol = 1e-8
    if formulation == "C":
        ours, ref = KernelSVC("C", C=2.0, tol=tol), SVC(C=2.0, tol=tol)
    else:
        ours, ref = KernelSVC("nu", nu=0.4, tol=tol), NuSVC(nu=0.4, tol=tol)
    ours.fit(X, y, 2)
    ref.fit(X, y)
    grid = np.random.default_rng(5).standard_normal((40, X.shape[1])) * 2
    # our first machine is positive for the lower class index; the reference flips the sign
    assert np.allclose(ours.decision_pairs(grid)[:, 0], -ref.decision_function(grid), atol=1e-5)
    assert ours.gamma_ == pytest.approx(1.0 / (X.shape[1] * X.var()))


def test_smo_satisfies_kkt_conditions():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 2))
    y = np.where(X[:, 0] + 0.3 * rng.standard_normal(40) > 0, 1.0, -1.0)
    C = 1.0
    sol = solve_c_svc(rbf_kernel(X, X, 0.5), y, C, eps=1e-9)
    f = (sol.alpha * y) @ rbf_kernel(X, X, 0.5) - sol.rho
    margin = y * f
    free = (sol.alpha > 1e-8) & (sol.alpha < C - 1e-8)
    assert np.allclose(margin[free], 1.0, atol=1e-6)
    assert np.all(margin[sol.alpha <= 1e-8] >= 1 - 1e-6)
    assert np.all(margin[sol.alpha >= C - 1e-8] <= 1 + 1e-6)


def test_degenerate_nu_raises():
    # identical rows with both labels: every dual point has zero margin
    X, y = np.ones((10, 2)), np.repeat([0, 1], 5)
    with pytest.raises(DegenerateNuError, match="raise nu"):
        KernelSVC("nu", nu=0.3, kernel="linear").fit(X, y, 2)


def test_linear_svm_separates_blobs(blobs):
    apart = gaussian_classes(30, 4, 3, separation=8.0, seed=11)
    model = fit(ClassifierSpec("LinearSVM"), apart)
    assert np.mean(predict(model, apart.X) == apart.labels) >= 0.99
    y = np.searchsorted(np.array(blobs.classes), blobs.labels)
    # the kept iterate is the best seen, so more iterations never raise the objective
    short = LinearSVM(max_iter=50).fit(blobs.X, y, 3).objective_
    long = LinearSVM(max_iter=500).fit(blobs.X, y, 3).objective_
    assert np.all(long <= short + 1e-15)


rigid = st.tuples(st.integers(0, 2**31), st.floats(-50, 50), st.floats(0.1, 10.0))


@settings(max_examples=25)
@given(rigid)
def test_knn_invariant_under_rotation_shift_and_scale(args):
    seed, shift, scale = args
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 3))
    y = rng.choice(["A", "B", "C"], 25)
    y[:3] = ["A", "B", "C"]
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    probe = rng.standard_normal((10, 3))
    spec = ClassifierSpec("KNN", {"k": 3})
    base = predict(fit(spec, dataset(X, y)), probe)
    moved = predict(fit(spec, dataset(scale * X @ Q + shift, y)), scale * probe @ Q + shift)
    assert np.array_equal(base, moved)


@settings(max_examples=25)
@given(st.integers(0, 2**31), st.sampled_from([np.exp, np.cbrt, lambda v: 3 * v + 1, np.arctan]))
def test_tree_invariant_under_monotone_feature_maps(seed, transform):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (30, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, "A", "B")
    y[:2] = ["A", "B"]
    spec = ClassifierSpec("DecisionTree", {"max_depth": None, "min_samples_leaf": 1})
    base = predict(fit(spec, dataset(X, y)), X)
    mapped = predict(fit(spec, dataset(transform(X), y)), transform(X))
    # training predictions depend only on the ordering of feature values
    assert np.array_equal(base, mapped)


@pytest.mark.parametrize("kind", KINDS)
def test_fitting_is_deterministic(kind, blobs):
    a = predict(fit(quick_spec(kind, seed=3), blobs), blobs.X)
    b = predict(fit(quick_spec(kind, seed=3), blobs), blobs.X)
    assert np.array_equal(a, b)


def test_mlp_seed_changes_the_weights(blobs):
    spec = quick_spec("MLP")
    a, b = fit(spec.with_seed(1), blobs), fit(spec.with_seed(2), blobs)
    assert not np.array_equal(a.estimator.params_["W0"], b.estimator.params_["W0"])


@pytest.mark.parametrize("kind", KINDS)
def test_save_load_round_trip(kind, blobs, tmp_path):
    model = fit(quick_spec(kind, seed=1), blobs)
    path = tmp_path / f"{kind}.json"
    save_model(model, path)
    back = load_model(path)
    assert back.spec == model.spec and back.classes == model.classes
    assert np.array_equal(predict(back, blobs.X), predict(model, blobs.X))
    if hasattr(model.estimator, "decision_function"):
        assert np.array_equal(back.estimator.decision_function(blobs.X), model.estimator.decision_function(blobs.X))


def test_load_rejects_foreign_files(tmp_path):
    from sedml.datamodel import DataError

    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        load_model(tmp_path / "x.json")


def test_spec_validation_and_round_trip():
    spec = ClassifierSpec("MLP", {"epochs": 5}, seed=4, name="tiny")
    assert ClassifierSpec.from_dict(spec.to_dict()) == spec
    assert spec.hyperparameters["hidden_layers"] == [100] and spec.label == "tiny" and spec.stochastic
    assert not ClassifierSpec("KNN").stochastic
    for kind, hp in [
        ("Boosting", {}),
        ("KNN", {"k": 0}),
        ("KNN", {"radius": 1.0}),
        ("Logistic", {"C": 0.0}),
        ("KernelSVM-Nu", {"nu": 1.0}),
        ("KernelSVM-C", {"gamma": -1.0}),
        ("MLP", {"dropout_rate": 1.0}),
        ("MLP", {"epochs": 0}),
    ]:
        with pytest.raises(ValueError):
            ClassifierSpec(kind, hp)


def test_default_suite_lineup():
    suite = default_suite(seed=2, epochs=7)
    assert [s.label for s in suite] == [
        "LogisticRegression", "GaussianNB", "DecisionTreeClassifier", "KNeighborsClassifier",
        "MLPClassifier", "LinearSVC", "SVC", "NuSVC", "DNN",
    ]
    assert suite[-1].hyperparameters["hidden_layers"] == [200, 400, 300, 100, 50]
    assert all(s.hyperparameters["epochs"] == 7 for s in suite if s.kind == "MLP")


def test_input_errors(blobs):
    with pytest.raises(SingleClassTrainingError):
        fit(ClassifierSpec("KNN"), dataset(np.eye(3), ["A"] * 3))
    model = fit(ClassifierSpec("GaussianNB"), blobs)
    with pytest.raises(DimensionMismatchError):
        predict(model, np.zeros((2, 5)))
    with pytest.raises(Exception, match="fully observed"):
        predict(model, DataMatrix.from_array(np.zeros((1, 4)), np.array([[True, False, True, True]])))


def test_training_history_tracks_eval_set(blobs):
    spec = ClassifierSpec("MLP", {"hidden_layers": [16], "epochs": 20, "learning_rate": 1e-2})
    model = fit(spec, blobs, eval_set=blobs)
    h = model.history
    assert len(h.loss) == len(h.train_accuracy) == len(h.test_accuracy) == 20
    assert h.loss[-1] < h.loss[0]
    assert h.train_accuracy == h.test_accuracy


def test_mlp_learns_separable_blobs(blobs):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = fit(ClassifierSpec("MLP", {"hidden_layers": [32], "epochs": 40, "learning_rate": 1e-2}), blobs)
    assert np.mean(predict(model, blobs.X) == blobs.labels) >= 0.95


def test_batch_norm_network_trains_and_reloads(blobs, tmp_path):
    spec = ClassifierSpec("MLP", {"hidden_layers": [16, 8], "batch_norm": True, "dropout_rate": 0.2, "epochs": 10})
    model = fit(spec, blobs)
    assert set(model.estimator.running_) == {"mean0", "var0", "mean1", "var1"}
    save_model(model, tmp_path / "bn.json")
    assert np.array_equal(predict(load_model(tmp_path / "bn.json"), blobs.X), predict(model, blobs.X))


def test_constant_classifier(blobs):
    ds = dataset(np.zeros((5, 1)), ["B", "B", "A", "C", "B"])
    assert predict(fit(ClassifierSpec("Constant"), ds), np.zeros((2, 1))).tolist() == ["B", "B"]
    assert predict(fit(ClassifierSpec("Constant", {"constant": "C"}), ds), np.zeros((1, 1))).tolist() == ["C"]


def test_mlp_classifier_rejects_bad_architecture():
    with pytest.raises(ValueError):
        NetworkArchitecture((3,))
    with pytest.raises(ValueError):
        NetworkArchitecture((3, 2), activation="gelu")
    with pytest.raises(ValueError):
        MLPClassifier(optimizer="rmsprop").architecture(3, 2)
