"""CART decision trees (Gini impurity) and a bagged random forest."""

from __future__ import annotations

import math

import numpy as np

LEAF = -1


def _gini_counts(pos, n):
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(x, y):
    """Best threshold on one feature.

    Returns ``(child_impurity_sum, threshold)`` where the impurity sum is
    ``n_left * gini_left + n_right * gini_right``, or None if the feature is
    constant on this node.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(xs)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    left_n = np.arange(1, n, dtype=np.float64)
    left_pos = np.cumsum(ys)[:-1].astype(np.float64)
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    cost = left_n * _gini_counts(left_pos, left_n) + right_n * _gini_counts(right_pos, right_n)
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    thr = (xs[i] + xs[i + 1]) / 2.0
    if thr == xs[i + 1]:
        thr = xs[i]
    return float(cost[i]), float(thr)


class DecisionTree:
    """Binary CART classifier on a dense float matrix with 0/1 labels.

    ``max_features`` is the number of features drawn (without replacement)
    at each node; None means all of them, in column order. If no drawn
    feature admits a split, the remaining features are tried before the
    node becomes a leaf.
    """

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features

    def fit(self, X, y, rng=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, p = X.shape
        self.n_features_ = p
        feature, threshold, left, right, value, n_node, impurity = [], [], [], [], [], [], []

        def new_node(idx):
            pos = y[idx].sum()
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(pos / len(idx))
            n_node.append(len(idx))
            impurity.append(_gini_counts(pos, len(idx)))
            return len(feature) - 1

        root = new_node(np.arange(n))
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if impurity[node] == 0.0 or len(idx) < 2 * self.min_samples_leaf:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if self.max_features is None or self.max_features >= p:
                order = np.arange(p)
                first = p
            else:
                order = rng.permutation(p)
                first = self.max_features
            Xn = X[idx]
            yn = y[idx]
            best = None
            for pos_, f in enumerate(order):
                if pos_ >= first and best is not None:
                    break
                found = _best_split(Xn[:, f], yn)
                if found is None:
                    continue
                cost, thr = found
                if self.min_samples_leaf > 1:
                    n_left = int((Xn[:, f] <= thr).sum())
                    if min(n_left, len(idx) - n_left) < self.min_samples_leaf:
                        continue
                if best is None or cost < best[0]:
                    best = (cost, int(f), thr)
            if best is None:
                continue
            _, f, thr = best
            go_left = Xn[:, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node] = f
            threshold[node] = thr
            lnode = new_node(li)
            rnode = new_node(ri)
            left[node], right[node] = lnode, rnode
            stack.append((rnode, ri, depth + 1))
            stack.append((lnode, li, depth + 1))
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        self.n_node_ = np.array(n_node, dtype=np.float64)
        self.impurity_ = np.array(impurity)
        return self

    @property
    def node_count(self) -> int:
        return len(self.feature_)

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature_[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            goes_left = X[rows, self.feature_[nd]] <= self.threshold_[nd]
            node[rows] = np.where(goes_left, self.left_[nd], self.right_[nd])
            active[rows] = self.feature_[node[rows]] != LEAF
        return node

    def predict_proba(self, X):
        """Probability of class 1 for each row."""
        return self.value_[self.apply(X)]

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def raw_importances(self):
        """Unnormalised weighted impurity decrease per feature."""
        imp = np.zeros(self.n_features_)
        for node in np.flatnonzero(self.feature_ != LEAF):
            l, r = self.left_[node], self.right_[node]
            gain = (
                self.n_node_[node] * self.impurity_[node]
                - self.n_node_[l] * self.impurity_[l]
                - self.n_node_[r] * self.impurity_[r]
            )
            imp[self.feature_[node]] += gain
        return imp

    def feature_importances(self):
        imp = self.raw_importances()
        total = imp.sum()
        return imp / total if total > 0 else imp


class RandomForest:
    """Bootstrap-aggregated CART trees with per-node feature subsampling.

    Class probabilities are the mean of the trees' leaf frequencies.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", max_depth=None, min_samples_leaf=1, bootstrap=True):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap

    def _n_features(self, p):
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(p)))
        if self.max_features is None:
            return p
        return max(1, min(p, int(self.max_features)))

    def fit(self, X, y, rng):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, p = X.shape
        k = self._n_features(p)
        self.trees_ = []
        for _ in range(self.n_estimators):
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_samples_leaf, k)
            tree.fit(X[idx], y[idx], rng)
            self.trees_.append(tree)
        return self

    def predict_proba(self, X):
        return np.mean([t.predict_proba(X) for t in self.trees_], axis=0)

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def feature_importances(self):
        per_tree = [t.feature_importances() for t in self.trees_]
        imp = np.mean(per_tree, axis=0)
        total = imp.sum()
        if total == 0:
            return np.full(len(imp), 1.0 / len(imp))
        return imp / total
