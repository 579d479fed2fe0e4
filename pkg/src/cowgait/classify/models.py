"""The six binary classifiers behind one fit/predict interface.

All models expect scaled features and labels in {0, 1}; class 1 (lame)
is the positive class. Everything is deterministic given the seed.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .. import kernels

KINDS = ("logistic_regression", "svm_linear", "svm_rbf", "random_forest", "gradient_boosting", "mlp")


class ModelError(ValueError):
    pass


def _check_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ModelError("X must be 2-D")
    if not np.all(np.isfinite(X)):
        raise ModelError("NaN or infinite feature value")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ModelError("y must have one label per row")
    if not np.all(np.isin(y, (0, 1))):
        raise ModelError("labels must be binary 0/1")
    return X, y.astype(np.float64)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Classifier:
    def fit(self, X, y):
        raise NotImplementedError

    def decision_function(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(_check_xy(X)) > 0).astype(np.int64)


class LogisticRegression(Classifier):
    """L2-regularized log-loss minimized by full-batch gradient descent.

    The objective is ``mean(logloss) + ||w||^2 / (2 C n)``; the intercept is
    not penalized. The step size is ``learning_rate`` capped at ``1 / L``.
    """

    def __init__(self, C=1.0, learning_rate=0.5, n_iter=2000, seed=0):
        self.C, self.learning_rate, self.n_iter = float(C), float(learning_rate), int(n_iter)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, p = X.shape
        w = np.zeros(p)
        b = 0.0
        lam = 1.0 / (self.C * n)
        # step capped at 1/L, L the Lipschitz constant of the gradient
        L = (np.linalg.norm(X, 2) ** 2 + n) / (4.0 * n) + lam
        step = min(self.learning_rate, 1.0 / L)
        for _ in range(self.n_iter):
            r = _sigmoid(X @ w + b) - y
            w -= step * (X.T @ r / n + lam * w)
            b -= step * r.mean()
        self.coef_, self.intercept_ = w, b
        return self

    def decision_function(self, X):
        return _check_xy(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return _sigmoid(self.decision_function(X))


class SVC(Classifier):
    """Soft-margin SVM trained by SMO with second-order working-set selection."""

    def __init__(self, kernel="rbf", C=1.0, gamma=None, tol=1e-3, max_iter=100_000, seed=0):
        if kernel not in ("linear", "rbf"):
            raise ModelError(f"unknown kernel {kernel!r}")
        self.kernel, self.C, self.gamma = kernel, float(C), gamma
        self.tol, self.max_iter = float(tol), int(max_iter)

    def _gram(self, A, B):
        if self.kernel == "linear":
            return A @ B.T
        d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-self.gamma_ * np.maximum(d2, 0.0))

    def fit(self, X, y):
        X, y01 = _check_xy(X, y)
        if np.unique(y01).size < 2:
            raise ModelError("SVM needs both classes")
        self.gamma_ = float(self.gamma) if self.gamma is not None else 1.0 / X.shape[1]
        ys = np.where(y01 > 0, 1.0, -1.0)
        K = np.ascontiguousarray(self._gram(X, X))
        alpha, G, iters, converged = kernels.smo_solve(K, ys, self.C, self.tol, self.max_iter)
        alpha, G = np.asarray(alpha), np.asarray(G)
        self.n_iter_, self.converged_ = int(iters), bool(converged)
        self.rho_ = _rho(alpha, G, ys, self.C)
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * ys)[sv]
        return self

    def decision_function(self, X):
        X = _check_xy(X)
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], -self.rho_)
        return self._gram(X, self.support_vectors_) @ self.dual_coef_ - self.rho_


def _rho(alpha, G, y, C):
    """Bias from the KKT conditions: mean y*G over free vectors, else the bound midpoint."""
    yG = y * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~(upper | lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


@dataclasses.dataclass
class _Tree:
    feature: list
    threshold: list
    left: list
    right: list
    value: list

    def apply(self, X):
        """Leaf index for every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        active = feat[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, feat[n]] <= thr[n]
            node[rows] = np.where(go_left, left[n], right[n])
            active = feat[node] >= 0
        return node

    def predict(self, X):
        return np.asarray(self.value)[self.apply(X)]


def _n_split_features(max_features, p):
    if max_features is None or max_features == "all":
        return p
    if max_features == "sqrt":
        return max(1, int(math.sqrt(p)))
    if isinstance(max_features, float):
        return max(1, min(p, int(round(max_features * p))))
    return max(1, min(p, int(max_features)))


def grow_tree(X, target, max_depth=None, min_samples_leaf=1, max_features=None, rng=None) -> _Tree:
    """CART regression tree minimizing squared error.

    On 0/1 targets squared error equals the Gini impurity (up to a factor
    of two), so the same tree serves classification. Leaves hold the mean
    target of their rows.
    """
    n, p = X.shape
    k = _n_split_features(max_features, p)
    all_feats = np.arange(p, dtype=np.int64)
    tree = _Tree([], [], [], [], [])
    stack = [(np.arange(n), 0, None, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(tree.feature)
        if parent is not None:
            (tree.right if is_right else tree.left)[parent] = node
        t = target[idx]
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(float(t.mean()))
        if (max_depth is not None and depth >= max_depth) or idx.size < 2 * min_samples_leaf \
                or np.all(t == t[0]):
            continue
        feats = all_feats if k == p else np.sort(rng.choice(p, k, replace=False)).astype(np.int64)
        f, thr, gain = kernels.best_split(np.ascontiguousarray(X[idx]), np.ascontiguousarray(t),
                                          feats, int(min_samples_leaf))
        if f < 0 or gain <= 1e-12:
            continue
        go_left = X[idx, f] <= thr
        nl = int(go_left.sum())
        if nl < min_samples_leaf or idx.size - nl < min_samples_leaf:
            continue  # midpoint rounded onto a sample value
        tree.feature[node] = int(f)
        tree.threshold[node] = float(thr)
        # right pushed first so the left subtree gets the lower node ids
        stack.append((idx[~go_left], depth + 1, node, True))
        stack.append((idx[go_left], depth + 1, node, False))
    return tree


class RandomForest(Classifier):
    def __init__(self, n_estimators=100, max_depth=None, min_samples_leaf=1, max_features="sqrt",
                 bootstrap=True, seed=0):
        self.n_estimators = int(n_estimators)
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n = X.shape[0]
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            self.trees_.append(grow_tree(X[rows], y[rows], self.max_depth, self.min_samples_leaf,
                                         self.max_features, rng))
        return self

    def predict_proba(self, X):
        X = _check_xy(X)
        return np.mean([t.predict(X) for t in self.trees_], axis=0)

    def decision_function(self, X):
        return self.predict_proba(X) - 0.5


class GradientBoosting(Classifier):
    """Stagewise regression trees on the logistic-loss gradient.

    Each tree is fit to the residuals ``y - p``; its leaves then take the
    one-step Newton value ``sum(r) / sum(p (1 - p))``.
    """

    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3, min_samples_leaf=1,
                 subsample=1.0, seed=0):
        self.n_estimators = int(n_estimators)
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)
        self.subsample = float(subsample)
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n = X.shape[0]
        p0 = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        self.init_ = float(np.log(p0 / (1 - p0)))
        F = np.full(n, self.init_)
        rng = np.random.default_rng(self.seed)
        self.trees_ = []
        for _ in range(self.n_estimators):
            prob = _sigmoid(F)
            r = y - prob
            if self.subsample < 1.0:
                rows = np.sort(rng.choice(n, max(2, int(round(self.subsample * n))), replace=False))
            else:
                rows = np.arange(n)
            tree = grow_tree(X[rows], r[rows], self.max_depth, self.min_samples_leaf)
            leaf = tree.apply(X[rows])
            num = np.bincount(leaf, weights=r[rows], minlength=len(tree.value))
            den = np.bincount(leaf, weights=(prob * (1 - prob))[rows], minlength=len(tree.value))
            tree.value = list(np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0))
            F += self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
        return self

    def decision_function(self, X):
        X = _check_xy(X)
        F = np.full(X.shape[0], self.init_)
        for t in self.trees_:
            F += self.learning_rate * t.predict(X)
        return F


class MLP(Classifier):
    """One hidden layer, sigmoid output, full-batch Adam for a fixed number of epochs."""

    def __init__(self, hidden=16, activation="relu", learning_rate=0.01, alpha=1e-4, epochs=500, seed=0):
        if activation not in ("relu", "sigmoid"):
            raise ModelError(f"unknown activation {activation!r}")
        self.hidden, self.activation = int(hidden), activation
        self.learning_rate, self.alpha, self.epochs = float(learning_rate), float(alpha), int(epochs)
        self.seed = seed

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else _sigmoid(z)

    def _act_grad(self, z, a):
        return (z > 0).astype(float) if self.activation == "relu" else a * (1 - a)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        n, p = X.shape
        rng = np.random.default_rng(self.seed)
        h = self.hidden
        params = [
            rng.normal(0, math.sqrt(2.0 / (p + h)), (p, h)), np.zeros(h),
            rng.normal(0, math.sqrt(2.0 / (h + 1)), h), np.zeros(1),
        ]
        m = [np.zeros_like(w) for w in params]
        v = [np.zeros_like(w) for w in params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        for t in range(1, self.epochs + 1):
            W1, c1, W2, c2 = params
            z = X @ W1 + c1
            a = self._act(z)
            out = _sigmoid(a @ W2 + c2[0])
            d_out = (out - y) / n
            g_W2 = a.T @ d_out + self.alpha * W2
            g_c2 = np.array([d_out.sum()])
            d_hid = np.outer(d_out, W2) * self._act_grad(z, a)
            g_W1 = X.T @ d_hid + self.alpha * W1
            g_c1 = d_hid.sum(axis=0)
            for i, g in enumerate((g_W1, g_c1, g_W2, g_c2)):
                m[i] = b1 * m[i] + (1 - b1) * g
                v[i] = b2 * v[i] + (1 - b2) * g * g
                mh = m[i] / (1 - b1 ** t)
                vh = v[i] / (1 - b2 ** t)
                params[i] = params[i] - self.learning_rate * mh / (np.sqrt(vh) + eps)
        self.params_ = params
        return self

    def decision_function(self, X):
        X = _check_xy(X)
        W1, c1, W2, c2 = self.params_
        return self._act(X @ W1 + c1) @ W2 + c2[0]


# Search spaces: ("loguniform", lo, hi), ("uniform", lo, hi), ("int", lo, hi) inclusive,
# ("choice", [options]).
SEARCH_SPACES = {
    "logistic_regression": {"C": ("loguniform", 1e-3, 1e3)},
    "svm_linear": {"C": ("loguniform", 1e-3, 1e2)},
    "svm_rbf": {"C": ("loguniform", 1e-2, 1e3), "gamma": ("loguniform", 1e-3, 1e1)},
    "random_forest": {
        "n_estimators": ("int", 20, 200),
        "max_depth": ("int", 2, 12),
        "min_samples_leaf": ("int", 1, 5),
        "max_features": ("choice", ["sqrt", 0.5, 1.0]),
    },
    "gradient_boosting": {
        "n_estimators": ("int", 20, 200),
        "learning_rate": ("loguniform", 0.01, 0.5),
        "max_depth": ("int", 1, 5),
        "subsample": ("uniform", 0.5, 1.0),
    },
    "mlp": {
        "hidden": ("int", 4, 64),
        "learning_rate": ("loguniform", 1e-3, 1e-1),
        "alpha": ("loguniform", 1e-6, 1e-1),
        "activation": ("choice", ["relu", "sigmoid"]),
    },
}

DEFAULT_PARAMS = {
    "logistic_regression": {"C": 1.0},
    "svm_linear": {"C": 1.0},
    "svm_rbf": {"C": 10.0, "gamma": 0.1},
    "random_forest": {"n_estimators": 100, "max_depth": 8, "min_samples_leaf": 1, "max_features": "sqrt"},
    "gradient_boosting": {"n_estimators": 100, "learning_rate": 0.1, "max_depth": 3, "subsample": 1.0},
    "mlp": {"hidden": 16, "learning_rate": 0.01, "alpha": 1e-4, "activation": "relu"},
}


def _in_space(value, dist) -> bool:
    kind = dist[0]
    if kind == "choice":
        return value in dist[1]
    if kind == "int":
        return float(value) == int(value) and dist[1] <= value <= dist[2]
    return dist[1] <= value <= dist[2]


@dataclasses.dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    space: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown classifier {self.kind!r}; expected one of {KINDS}")
        space = self.space if self.space is not None else SEARCH_SPACES[self.kind]
        for name, value in self.params.items():
            if name in space and not _in_space(value, space[name]):
                raise ModelError(f"{self.kind}: {name}={value!r} outside search range {space[name]}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def default(cls, kind, seed=0) -> "ClassifierSpec":
        return cls(kind, dict(DEFAULT_PARAMS[kind]), seed)


def make_classifier(spec: ClassifierSpec) -> Classifier:
    p = dict(spec.params)
    if spec.kind == "logistic_regression":
        return LogisticRegression(seed=spec.seed, **p)
    if spec.kind == "svm_linear":
        p.pop("gamma", None)
        return SVC(kernel="linear", seed=spec.seed, **p)
    if spec.kind == "svm_rbf":
        return SVC(kernel="rbf", seed=spec.seed, **p)
    if spec.kind == "random_forest":
        return RandomForest(seed=spec.seed, **p)
    if spec.kind == "gradient_boosting":
        return GradientBoosting(seed=spec.seed, **p)
    return MLP(seed=spec.seed, **p)


def train(spec: ClassifierSpec, X, y) -> Classifier:
    return make_classifier(spec).fit(X, y)


def predict(model: Classifier, X) -> np.ndarray:
    return model.predict(X)
