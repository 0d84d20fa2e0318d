import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drowsiness.errors import ParameterError
from drowsiness.models import (
    EstimatorSpec, canonical_order, default_grid, load_model, model_from_json, model_to_json, predict, save_model, train,
)
from drowsiness.models import svm, trees
from drowsiness.rng import SplitMix64
from oracles import gp_dense_mean, kkt_violation, knn_vote_bruteforce


def blobs(n=200, sep=6.0, seed=0, classes=2, p=2):
    rng = np.random.default_rng(seed)
    centres = np.array([[sep * c] + [0.0] * (p - 1) for c in range(classes)])
    y = np.arange(n) % classes
    return centres[y] + rng.standard_normal((n, p)), y


def distinct_rows(n=60, p=3, seed=1):
    return np.random.default_rng(seed).standard_normal((n, p))


# --- kNN ---------------------------------------------------------------------

def test_knn_k1_memorizes():
    X = distinct_rows()
    y = np.random.default_rng(2).integers(0, 3, X.shape[0])
    m = train(EstimatorSpec("KNN", "Classification", {"k": 1}), X, y)
    assert np.array_equal(predict(m, X), y)


def test_knn_vote_matches_bruteforce():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 4, (40, 2)).astype(float)  # many equal distances
    y = rng.integers(0, 3, 40)
    m = train(EstimatorSpec("KNN", "Classification", {"k": 3}), X, y)
    Q = rng.integers(0, 4, (30, 2)).astype(float) + 0.5
    # the model canonicalizes row order, so the oracle sees the same order
    order = np.lexsort([y.astype(float), X[:, 1], X[:, 0]])
    want = [knn_vote_bruteforce(X[order], y[order], q, 3) for q in Q]
    assert predict(m, Q).tolist() == want


def test_knn_full_neighbourhood_mean():
    X = distinct_rows(20)
    y = np.random.default_rng(4).uniform(0, 1, 20)
    m = train(EstimatorSpec("KNN", "Regression", {"k": 20}), X, y)
    assert np.allclose(predict(m, X), y.mean(), rtol=1e-14)


def test_knn_k_too_large():
    with pytest.raises(ParameterError):
        train(EstimatorSpec("KNN", "Regression", {"k": 5}), distinct_rows(4), np.zeros(4))


# --- CART / RF -----------------------------------------------------------------

def test_cart_unlimited_depth_memorizes():
    X = distinct_rows(80)
    y = np.random.default_rng(5).integers(0, 3, 80)
    m = train(EstimatorSpec("DT", "Classification"), X, y)
    assert np.array_equal(predict(m, X), y)


def _depth2_xor_exists(X, y):
    # enumerate every depth-2 axis-aligned tree over midpoint thresholds
    cuts = [(f, t) for f in range(2) for t in np.unique(X[:, f])[:-1] + 0.5]
    for (f0, t0), (f1, t1), (f2, t2) in itertools.product(cuts, repeat=3):
        left = X[:, f0] <= t0
        pred = np.empty(4, dtype=int)
        for mask, (f, t) in ((left, (f1, t1)), (~left, (f2, t2))):
            sub = np.flatnonzero(mask)
            for side in (X[sub, f] <= t, X[sub, f] > t):
                rows = sub[side]
                if rows.size:
                    pred[rows] = np.bincount(y[rows], minlength=3).argmax()
        if np.array_equal(pred, y):
            return True
    return False


def test_cart_xor_depth2():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    assert _depth2_xor_exists(X, y)
    m = train(EstimatorSpec("DT", "Classification", {"max_depth": 2}), X, y)
    assert np.array_equal(predict(m, X), y)


def test_cart_constant_target_single_leaf():
    m = train(EstimatorSpec("DT", "Regression"), distinct_rows(30), np.full(30, 0.4))
    assert m.state["feature"].size == 1
    assert np.all(predict(m, distinct_rows(5, seed=9)) == 0.4)


def test_cart_tie_prefers_lower_feature_then_threshold():
    # both features separate perfectly: feature 0 must win
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    st_ = trees.fit_forest(X, y, classification=True)
    assert st_["feature"][0] == 0 and st_["threshold"][0] == 1.5


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), clf=st.booleans())
def test_rf_single_tree_equals_cart(seed, clf):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((50, 4))
    y = rng.integers(0, 3, 50) if clf else rng.uniform(0, 1, 50)
    task = "Classification" if clf else "Regression"
    cart = train(EstimatorSpec("DT", task, {"max_depth": None}), X, y)
    rf = train(EstimatorSpec("RF", task, {"n_trees": 1, "bootstrap": False, "max_features": 4}, seed=seed), X, y)
    Q = rng.standard_normal((40, 4))
    assert np.array_equal(predict(cart, Q), predict(rf, Q))


def test_rf_deterministic_and_separable():
    X, y = blobs(200, sep=5.0)
    spec = EstimatorSpec("RF", "Classification", {"n_trees": 100}, seed=4)
    a, b = train(spec, X, y), train(spec, X, y)
    Q = np.random.default_rng(1).standard_normal((50, 2)) * 4
    assert np.array_equal(predict(a, Q), predict(b, Q))
    pred = predict(a, X)
    f1 = np.mean([2 * np.sum((pred == c) & (y == c)) / (np.sum(pred == c) + np.sum(y == c)) for c in (0, 1)])
    assert f1 >= 0.99


def test_numba_rng_matches_python_splitmix():
    state = np.array([12345], dtype=np.uint64)
    ref = SplitMix64(12345)
    for n in (1, 2, 7, 1000, 2**40 + 3):
        assert trees._sm_below(state, n) == ref.randbelow(n)


# --- SVM ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_svm_binary_kkt_audit(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((80, 3))
    labels = np.where(X[:, 0] + 0.5 * rng.standard_normal(80) > 0, 1.0, -1.0)
    for C in (0.5, 10.0):
        K = svm.rbf_kernel(X, X, 0.5)
        coef, rho, conv, it, alpha = svm.solve_binary(K, labels, C, seed=seed)
        assert conv
        assert kkt_violation(K, labels, alpha, rho, C) <= 2e-3


def test_svm_separates_margin_blobs():
    X, y = blobs(100, sep=8.0, seed=3)
    m = train(EstimatorSpec("SVM", "Classification", {"C": 10.0, "gamma": 0.1}), X, y)
    assert np.array_equal(predict(m, X), y)
    assert m.info["converged"]


def test_svm_three_class_outputs_levels():
    X, y = blobs(150, sep=6.0, seed=4, classes=3)
    m = train(EstimatorSpec("SVM", "Classification", {"C": 1.0}), X, y)
    p = predict(m, X)
    assert set(p.tolist()) <= {0, 1, 2}
    assert np.mean(p == y) > 0.95


def test_svr_single_point():
    m = train(EstimatorSpec("SVM", "Regression", {"epsilon": 0.0, "C": 10.0}), np.array([[0.3, 0.1]]), np.array([0.7]))
    assert abs(predict(m, np.array([[0.3, 0.1]]))[0] - 0.7) <= 1e-3


def test_svr_fits_smooth_function():
    x = np.linspace(-3, 3, 60)[:, None]
    y = np.sin(x[:, 0])
    m = train(EstimatorSpec("SVM", "Regression", {"C": 10.0, "gamma": 1.0, "epsilon": 0.01}), x, y)
    assert np.sqrt(np.mean((predict(m, x) - y) ** 2)) < 0.02


def test_svm_invalid_hyperparameters():
    for hp in ({"C": 0.0}, {"gamma": -1.0}, {"C": -1}):
        with pytest.raises(ParameterError):
            EstimatorSpec("SVM", "Classification", hp)


# --- GP ----------------------------------------------------------------------

def test_gp_interpolates_noise_free():
    # residual at training points is exactly jitter * alpha, so use a design
    # whose kernel matrix is reasonably conditioned
    X = np.random.default_rng(1).uniform(0, 5, (30, 2))
    y = np.sin(X[:, 0]) + X[:, 1]
    m = train(EstimatorSpec("GP", "Regression", {"noise": 0.0, "length_scale": 1.0}), X, y)
    assert np.max(np.abs(predict(m, X) - y)) <= 1e-6
    order = canonical_order(X, y)  # the model stores alpha in canonical row order
    assert np.allclose((y - predict(m, X))[order], m.state["jitter"] * m.state["alpha"], atol=1e-12)


@settings(max_examples=20)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 50), ell=st.sampled_from([0.5, 1.0, 2.0]),
       noise=st.sampled_from([1e-4, 1e-2, 1e-1]))
def test_gp_matches_dense_solve(seed, n, ell, noise):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    y = rng.standard_normal(n)
    m = train(EstimatorSpec("GP", "Regression", {"length_scale": ell, "noise": noise}), X, y)
    Q = rng.standard_normal((10, 3))
    want = gp_dense_mean(X, y, Q, ell, noise + m.state["jitter"])
    assert np.allclose(predict(m, Q), want, rtol=1e-8, atol=1e-8)


def test_gp_variance_smaller_at_training_points():
    X = np.linspace(0, 5, 10)[:, None]
    m = train(EstimatorSpec("GP", "Regression", {"noise": 1e-4}), X, np.sin(X[:, 0]))
    _, v_in = predict(m, X, return_var=True)
    _, v_far = predict(m, np.array([[50.0]]), return_var=True)
    assert np.all(v_in <= v_far[0])


def test_gp_sine_heldout():
    x = np.linspace(0, 2 * np.pi, 20)[:, None]
    xs = np.random.default_rng(0).uniform(0, 2 * np.pi, (50, 1))
    m = train(EstimatorSpec("GP", "Regression", {"length_scale": 1.0, "noise": 1e-4}), x, np.sin(x[:, 0]))
    pred = predict(m, xs)
    assert np.sqrt(np.mean((pred - np.sin(xs[:, 0])) ** 2)) <= 0.05
    assert np.allclose(pred, gp_dense_mean(x, np.sin(x[:, 0]), xs, 1.0, 1e-4 + m.state["jitter"]), atol=1e-8)


# --- shared contract -------------------------------------------------------------

FAMILIES = ("KNN", "DT", "RF", "SVM", "GP")


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("task", ["Regression", "Classification"])
def test_predict_contract(family, task, tmp_path):
    X, y = blobs(60, seed=6, classes=3, p=3)
    target = y if task == "Classification" else y / 2.0
    m = train(EstimatorSpec(family, task, seed=3), X, target)
    p1, p2 = predict(m, X), predict(m, X)
    assert np.array_equal(p1, p2)
    if task == "Classification":
        assert set(p1.tolist()) <= {0, 1, 2}
    assert predict(m, np.empty((0, 3))).shape == (0,)
    with pytest.raises(ParameterError):
        predict(m, np.zeros((2, 4)))
    back = model_from_json(model_to_json(m))
    assert np.array_equal(predict(back, X), p1)
    save_model(m, tmp_path / "model.json")
    assert np.array_equal(predict(load_model(tmp_path / "model.json"), X), p1)


@pytest.mark.parametrize("family", FAMILIES)
def test_row_permutation_invariance(family):
    X, y = blobs(60, seed=7, classes=3, p=3)
    perm = np.random.default_rng(0).permutation(60)
    spec = EstimatorSpec(family, "Classification", seed=5)
    Q = np.random.default_rng(1).standard_normal((20, 3)) * 5
    assert np.array_equal(predict(train(spec, X, y), Q), predict(train(spec, X[perm], y[perm]), Q))


def test_empty_training_set():
    with pytest.raises(ParameterError):
        train(EstimatorSpec("DT", "Regression"), np.empty((0, 2)), np.empty(0))


def test_default_grids_follow_documented_sizes():
    sizes = {f: len(default_grid(f, "Classification")) for f in FAMILIES}
    assert sizes == {"KNN": 6, "DT": 15, "RF": 2, "SVM": 12, "GP": 9}
    assert len(default_grid("SVM", "Regression")) == 24
