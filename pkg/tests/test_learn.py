import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm
from sklearn.base import clone

from congruent.data import CurveRecord
from congruent.errors import DataError, DivergenceError, SchemaError
from congruent.learn import (
    PCA,
    DecisionTreeGini,
    LogisticRegressionGD,
    balanced_split,
    build_features,
    confusion_metrics,
    evaluate,
    jacobi_eigh,
    pca,
    report,
    roc_auc,
    train_logistic,
    train_tree,
)


def _separable(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X @ np.array([2.0, -1.0, 0.5]) > 0).astype(int)
    return X, y


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=4, max_size=4))
def test_confusion_identities(cells):
    tn, fp, fn, tp = cells
    if tn + fp + fn + tp == 0:
        return
    acc, prec, rec, f1 = confusion_metrics([[tn, fp], [fn, tp]])
    y_true = [0] * (tn + fp) + [1] * (fn + tp)
    y_pred = [0] * tn + [1] * fp + [0] * fn + [1] * tp
    assert acc == pytest.approx(skm.accuracy_score(y_true, y_pred))
    assert prec == pytest.approx(skm.precision_score(y_true, y_pred, zero_division=0))
    assert rec == pytest.approx(skm.recall_score(y_true, y_pred, zero_division=0))
    assert f1 == pytest.approx(skm.f1_score(y_true, y_pred, zero_division=0))


def test_hand_confusion():
    assert confusion_metrics([[50, 10], [5, 35]]) == (0.85, 35 / 45, 0.875, 2 * (35 / 45) * 0.875 / (35 / 45 + 0.875))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-5, 5)), min_size=2, max_size=60))
def test_auc_matches_sklearn(pairs):
    y = [a for a, _ in pairs]
    s = [float(b) for _, b in pairs]
    if len(set(y)) < 2:
        with pytest.raises(DataError):
            roc_auc(y, s)
    else:
        assert roc_auc(y, s) == pytest.approx(skm.roc_auc_score(y, s), abs=1e-12)


def test_logistic_separable():
    X, y = _separable()
    m = LogisticRegressionGD(epochs=800, seed=3).fit(X, y)
    assert (m.predict(X) == y).mean() >= 0.95
    h = m.loss_history_
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    assert m.predict_proba(X).shape == (len(X), 2)


def test_logistic_determinism():
    X, y = _separable()
    a = LogisticRegressionGD(seed=5).fit(X, y)
    b = LogisticRegressionGD(seed=5).fit(X, y)
    assert pickle.dumps((a.coef_, a.intercept_)) == pickle.dumps((b.coef_, b.intercept_))


def test_logistic_divergence():
    X, y = _separable()
    with pytest.raises(DivergenceError):
        LogisticRegressionGD(learning_rate=float("inf")).fit(X, y)


def test_estimator_api():
    m = LogisticRegressionGD(learning_rate=0.3)
    assert clone(m).get_params()["learning_rate"] == 0.3
    t = DecisionTreeGini(max_depth=3).set_params(min_leaf=5)
    assert t.get_params() == {"max_depth": 3, "min_leaf": 5}


def test_tree_xor_and_stump():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 25, dtype=float)
    y = np.array([0, 1, 1, 0] * 25)
    t = DecisionTreeGini(max_depth=2, min_leaf=1).fit(X, y)
    assert (t.predict(X) == y).all()
    Xs, ys = _separable()
    stump = DecisionTreeGini(max_depth=1, min_leaf=1).fit(Xs, ys)
    assert stump.depth_ == 1
    assert (stump.predict(Xs) == ys).mean() > 0.7


def test_tree_separable_high_accuracy():
    X, y = _separable(1000, seed=2)
    t = DecisionTreeGini(max_depth=8, min_leaf=5).fit(X, y)
    assert (t.predict(X) == y).mean() >= 0.95


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_jacobi_matches_numpy(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    A = A + A.T
    w, V = jacobi_eigh(A)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(A), atol=1e-10)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-10)
    assert np.allclose(A @ V, V * w, atol=1e-9)


def test_pca_properties():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
    res = pca(M, 5)
    assert sum(res.explained_variance) == pytest.approx(res.total_variance, rel=1e-8)
    C = res.components
    assert np.allclose(C @ C.T, np.eye(5), atol=1e-10)
    model = PCA(5).fit(M)
    assert np.allclose(model.inverse_transform(model.transform(M)), M, atol=1e-8)


def test_pca_zero_variance():
    with pytest.raises(DataError):
        pca(np.ones((10, 3)), 2)


def test_pca_collinear_and_square():
    t = np.arange(10.0)
    res = pca(np.column_stack([t, 2 * t]), 2)
    assert res.explained_variance[0] == pytest.approx(res.total_variance, rel=1e-12)
    sq = pca(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), 2)
    assert sq.explained_variance[0] == pytest.approx(sq.explained_variance[1], rel=1e-12)


def test_balanced_split():
    y = np.array([0] * 70 + [1] * 30)
    kept, train, test = balanced_split(y, seed=0)
    assert len(kept) == 60 and np.sum(y[kept]) == 30
    assert len(set(train) & set(test)) == 0 and len(train) + len(test) == 60
    assert np.sum(y[kept][test]) == 6


def _records(n=400):
    out = []
    for D in range(1, 8 * n, 2):
        if D % 8 in (1, 3, 5, 7):
            status = "CONGRUENT_CERTIFIED" if D % 8 in (5, 7) else "NONCONGRUENT_CERTIFIED"
            out.append(CurveRecord(D, D % 8, D % 16, D % 32, 1, int(D % 8 >= 5), "matrix", status))
    return out


def test_features_and_models_end_to_end():
    ds = build_features(_records(), "residues", seed=4)
    assert ds.feature_names[-1] == "residue8"
    rep = evaluate(train_tree(ds), ds)
    assert rep.accuracy == 1.0
    rep2 = evaluate(train_logistic(ds, seed=4), ds)
    assert rep2.to_json() == evaluate(train_logistic(ds, seed=4), ds).to_json()


def test_traces_features():
    ds = build_features(_records(100), "traces", seed=0, n_primes=20)
    assert ds.X.shape[1] == 20


def test_missing_feature_columns():
    with pytest.raises(SchemaError):
        build_features(_records(), "bsd", seed=0)


def test_report_text():
    r = report([0, 1, 1, 0], [0, 1, 0, 0], [0.1, 0.9, 0.4, 0.2])
    assert "accuracy" in r.to_text() and r.confusion == [[2, 0], [1, 1]]
