"""Logistic regression, a Gini decision tree and PCA, written from scratch."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import DataError, DivergenceError


def _binary_targets(y: np.ndarray):
    classes = np.unique(y)
    if len(classes) != 2:
        raise DataError(f"need exactly two classes, got {len(classes)}")
    return classes, (y == classes[1]).astype(np.float64)


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Binary logistic regression by full-batch gradient descent on the mean log-loss.

    Features are z-scored with statistics from the data passed to ``fit``.
    A step that would raise the loss is retried with half the learning rate,
    so the recorded loss never increases.
    """

    def __init__(self, learning_rate: float = 0.1, epochs: int = 500, seed: int = 0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    @staticmethod
    def _loss(z: np.ndarray, t: np.ndarray) -> float:
        # log(1 + e^z) - t z, evaluated stably
        return float(np.mean(np.logaddexp(0.0, z) - t * z))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, t = _binary_targets(y)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        rng = np.random.default_rng(self.seed)
        w = rng.normal(scale=0.01, size=X.shape[1])
        b = 0.0
        lr = self.learning_rate
        loss = self._loss(Z @ w + b, t)
        history = [loss]
        for _ in range(self.epochs):
            p = 1.0 / (1.0 + np.exp(-(Z @ w + b)))
            gw = Z.T @ (p - t) / len(t)
            gb = float(np.mean(p - t))
            while True:
                nw, nb = w - lr * gw, b - lr * gb
                with np.errstate(over="ignore", invalid="ignore"):
                    new = self._loss(Z @ nw + nb, t)
                if not np.isfinite(new):
                    raise DivergenceError("log-loss became non-finite")
                if new <= loss or lr < 1e-12:
                    break
                lr /= 2
            if new > loss:
                break
            w, b, loss = nw, nb, new
            history.append(loss)
        self.coef_ = w / self.scale_
        self.intercept_ = b - float(self.mean_ / self.scale_ @ w)
        self.loss_history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


@dataclass
class _Node:
    value: np.ndarray  # class counts [n0, n1]
    feature: int = -1
    threshold: float = 0.0
    left: Optional["_Node"] = None
    right: Optional["_Node"] = None


def _gini(n0, n1):
    n = n0 + n1
    return 1.0 - (n0 / n) ** 2 - (n1 / n) ** 2


class DecisionTreeGini(ClassifierMixin, BaseEstimator):
    """Greedy CART tree on Gini impurity.

    Ties between candidate splits go to the lowest feature index, then the
    lowest threshold; thresholds are midpoints between sorted distinct values.
    """

    def __init__(self, max_depth: int = 8, min_leaf: int = 20):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, t = _binary_targets(y)
        self.n_features_in_ = X.shape[1]
        self.tree_ = self._grow(X, t.astype(np.int64), 0)
        return self

    def _best_split(self, X: np.ndarray, t: np.ndarray):
        n = len(t)
        n1 = int(t.sum())
        parent = _gini(n - n1, n1)
        best = None  # (impurity, feature, threshold)
        leaf = max(self.min_leaf, 1)
        for j in range(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            xs, ts = X[order, j], t[order]
            ones = np.cumsum(ts)[:-1]
            left_n = np.arange(1, n)
            ok = (xs[1:] > xs[:-1]) & (left_n >= leaf) & (n - left_n >= leaf)
            if not ok.any():
                continue
            ln, l1 = left_n[ok], ones[ok]
            rn, r1 = n - ln, n1 - l1
            imp = (ln * (1 - (l1 / ln) ** 2 - ((ln - l1) / ln) ** 2) + rn * (1 - (r1 / rn) ** 2 - ((rn - r1) / rn) ** 2)) / n
            k = int(np.argmin(imp))  # first minimum is the lowest threshold
            if best is None or imp[k] < best[0] - 1e-15:
                pos = np.nonzero(ok)[0][k]
                best = (float(imp[k]), j, float((xs[pos] + xs[pos + 1]) / 2))
        if best is None or best[0] > parent + 1e-15:
            return None
        return best

    def _grow(self, X, t, depth) -> _Node:
        n1 = int(t.sum())
        node = _Node(np.array([len(t) - n1, n1], dtype=np.int64))
        if depth >= self.max_depth or n1 == 0 or n1 == len(t):
            return node
        split = self._best_split(X, t)
        if split is None:
            return node
        _, j, thr = split
        mask = X[:, j] <= thr
        node.feature, node.threshold = j, thr
        node.left = self._grow(X[mask], t[mask], depth + 1)
        node.right = self._grow(X[~mask], t[~mask], depth + 1)
        return node

    def _leaf(self, x) -> _Node:
        node = self.tree_
        while node.left is not None:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        counts = np.array([self._leaf(x).value for x in X], dtype=np.float64).reshape(-1, 2)
        p = counts[:, 1] / counts.sum(axis=1)
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return self.classes_[(self.predict_proba(X)[:, 1] > 0.5).astype(int)]

    @property
    def depth_(self) -> int:
        check_is_fitted(self, "tree_")

        def d(node):
            return 0 if node.left is None else 1 + max(d(node.left), d(node.right))

        return d(self.tree_)


# ---------------------------------------------------------------------------
# PCA


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1.0)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A).copy(), V


@dataclass
class PCAResult:
    mean: np.ndarray
    components: np.ndarray  # rows
    explained_variance: np.ndarray
    projected: np.ndarray
    total_variance: float


class PCA(TransformerMixin, BaseEstimator):
    def __init__(self, n_components: Optional[int] = None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise DataError("PCA needs at least two rows")
        k = X.shape[1] if self.n_components is None else self.n_components
        if not 1 <= k <= X.shape[1]:
            raise DataError(f"n_components must be in [1, {X.shape[1]}]")
        self.mean_ = X.mean(axis=0)
        C = np.cov(X - self.mean_, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
        total = float(np.trace(C))
        if total <= 0:
            raise DataError("all columns have zero variance")
        vals, vecs = jacobi_eigh(C)
        order = np.argsort(-vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order].T
        # deterministic signs: the largest-magnitude entry of each component is positive
        for i, v in enumerate(vecs):
            if v[np.argmax(np.abs(v))] < 0:
                vecs[i] = -v
        self.all_components_ = vecs
        self.all_variance_ = np.clip(vals, 0.0, None)
        self.components_ = vecs[:k]
        self.explained_variance_ = self.all_variance_[:k]
        self.total_variance_ = total
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self, "components_")
        return np.asarray(Z) @ self.components_ + self.mean_


def pca(matrix, k: int) -> PCAResult:
    model = PCA(k).fit(matrix)
    return PCAResult(model.mean_, model.components_, model.explained_variance_, model.transform(matrix), model.total_variance_)


def train_logistic(dataset, learning_rate: float = 0.1, epochs: int = 500, seed: int = 0) -> LogisticRegressionGD:
    return LogisticRegressionGD(learning_rate, epochs, seed).fit(dataset.X_train, dataset.y_train)


def train_tree(dataset, max_depth: int = 8, min_leaf: int = 20) -> DecisionTreeGini:
    return DecisionTreeGini(max_depth, min_leaf).fit(dataset.X_train, dataset.y_train)
