"""Binary classifiers on dense design matrices with 0/1 labels.

Each estimator exposes ``fit(X, y, rng)`` and ``predict(X)``. ``rng`` is a
``numpy.random.Generator``; deterministic estimators ignore it.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg
from scipy.special import expit, logsumexp

from ..errors import SingularCovariance


class GaussianNB:
    def __init__(self, var_smoothing=1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, X, y, rng=None):
        top = float(X.var(axis=0).max()) if X.size else 0.0
        eps = self.var_smoothing * (top if top > 0 else 1.0)
        self.classes_ = np.array([0, 1])
        self.theta_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.array([X[y == c].var(axis=0) for c in self.classes_]) + eps
        self.log_prior_ = np.log(np.array([np.mean(y == c) for c in self.classes_]))
        return self

    def joint_log_likelihood(self, X):
        out = []
        for c in range(2):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll = ll - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            out.append(self.log_prior_[c] + ll)
        return np.column_stack(out)

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def predict(self, X):
        return np.argmax(self.joint_log_likelihood(X), axis=1)


class KNeighbors:
    """Majority vote over the k Euclidean nearest training rows.

    Distance ties resolve towards the lower training index.
    """

    def __init__(self, n_neighbors=5, chunk_bytes=32 * 2**20):
        self.n_neighbors = n_neighbors
        self.chunk_bytes = chunk_bytes

    def fit(self, X, y, rng=None):
        self.X_ = np.asarray(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=np.int64)
        return self

    def kneighbors(self, X):
        X = np.asarray(X, dtype=np.float64)
        k = min(self.n_neighbors, len(self.X_))
        per_row = max(1, self.X_.size * 8)
        step = max(1, self.chunk_bytes // per_row)
        out = np.empty((len(X), k), dtype=np.int64)
        for s in range(0, len(X), step):
            diff = X[s : s + step, None, :] - self.X_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            out[s : s + step] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return out

    def predict(self, X):
        if len(X) == 0:
            return np.zeros(0, dtype=np.int64)
        votes = self.y_[self.kneighbors(X)]
        return (votes.mean(axis=1) > 0.5).astype(np.int64)


def _ridge(cov, ridge_factor):
    d = cov.shape[0]
    lam = ridge_factor * np.trace(cov) / d
    return cov + (lam if lam > 0 else ridge_factor) * np.eye(d)


def _cholesky(cov):
    try:
        return linalg.cho_factor(cov, lower=True)
    except linalg.LinAlgError:
        raise SingularCovariance("class covariance is singular even after ridge regularisation") from None


class LinearDiscriminant:
    """Gaussian classes with a shared (pooled, ridge-stabilised) covariance."""

    def __init__(self, ridge=1e-6):
        self.ridge = ridge

    def fit(self, X, y, rng=None):
        n, d = X.shape
        self.means_ = np.array([X[y == c].mean(axis=0) for c in (0, 1)])
        centred = X - self.means_[y]
        cov = centred.T @ centred / n
        self.chol_ = _cholesky(_ridge(cov, self.ridge))
        self.priors_ = np.array([np.mean(y == c) for c in (0, 1)])
        self.coef_ = linalg.cho_solve(self.chol_, self.means_.T).T
        self.intercept_ = -0.5 * np.sum(self.coef_ * self.means_, axis=1) + np.log(self.priors_)
        return self

    def decision_function(self, X):
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class QuadraticDiscriminant:
    """Gaussian classes with one ridge-stabilised covariance each."""

    def __init__(self, ridge=1e-6):
        self.ridge = ridge

    def fit(self, X, y, rng=None):
        self.means_, self.chol_, self.logdet_ = [], [], []
        for c in (0, 1):
            Xc = X[y == c]
            mu = Xc.mean(axis=0)
            centred = Xc - mu
            cov = _ridge(centred.T @ centred / len(Xc), self.ridge)
            chol = _cholesky(cov)
            self.means_.append(mu)
            self.chol_.append(chol)
            self.logdet_.append(2.0 * np.sum(np.log(np.diag(chol[0]))))
        self.priors_ = np.array([np.mean(y == c) for c in (0, 1)])
        return self

    def decision_function(self, X):
        out = []
        for c in (0, 1):
            diff = X - self.means_[c]
            z = linalg.solve_triangular(self.chol_[c][0], diff.T, lower=True)
            maha = np.sum(z * z, axis=0)
            out.append(-0.5 * self.logdet_[c] - 0.5 * maha + np.log(self.priors_[c]))
        return np.column_stack(out)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class LogisticRegression:
    """L2-penalised logistic regression fitted by full-batch gradient descent.

    The step size is ``1 / L`` with ``L`` the Lipschitz constant of the
    gradient, which makes the training loss non-increasing. Weights start
    from a small seeded Gaussian draw; the intercept is not penalised.
    """

    def __init__(self, l2=1e-4, n_iter=500, init_scale=0.01):
        self.l2 = l2
        self.n_iter = n_iter
        self.init_scale = init_scale

    def _loss(self, Xb, y, w):
        z = Xb @ w
        # log(1 + exp(z)) - y z, computed stably
        nll = np.mean(np.logaddexp(0.0, z) - y * z)
        return nll + 0.5 * self.l2 * float(w[:-1] @ w[:-1])

    def fit(self, X, y, rng):
        n, d = X.shape
        Xb = np.hstack([X, np.ones((n, 1))])
        yf = y.astype(np.float64)
        lip = float(np.linalg.eigvalsh(Xb.T @ Xb / n)[-1]) / 4.0 + self.l2
        step = 1.0 / lip
        w = np.append(rng.normal(0.0, self.init_scale, size=d), 0.0)
        penal = np.append(np.full(d, self.l2), 0.0)
        self.loss_history_ = [self._loss(Xb, yf, w)]
        for _ in range(self.n_iter):
            grad = Xb.T @ (expit(Xb @ w) - yf) / n + penal * w
            w = w - step * grad
            self.loss_history_.append(self._loss(Xb, yf, w))
        self.coef_ = w[:-1]
        self.intercept_ = w[-1]
        return self

    def decision_function(self, X):
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return expit(self.decision_function(X))

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)


class RidgeClassifier:
    """Closed-form ridge regression on +/-1 targets; intercept unpenalised."""

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y, rng=None):
        t = np.where(y == 1, 1.0, -1.0)
        x_mean = X.mean(axis=0)
        t_mean = t.mean()
        Xc = X - x_mean
        A = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        self.coef_ = linalg.solve(A, Xc.T @ (t - t_mean), assume_a="pos")
        self.intercept_ = t_mean - x_mean @ self.coef_
        return self

    def decision_function(self, X):
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)


class SGDHinge:
    """Linear SVM trained by plain SGD on the hinge loss.

    Constant learning rate, L2 weight decay, and a fresh seeded shuffle of
    the training rows at every epoch.
    """

    def __init__(self, learning_rate=0.01, n_epochs=5, alpha=1e-4):
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.alpha = alpha

    def fit(self, X, y, rng):
        n, d = X.shape
        t = np.where(y == 1, 1.0, -1.0)
        w = np.zeros(d)
        b = 0.0
        eta = self.learning_rate
        decay = 1.0 - eta * self.alpha
        rows = list(X)
        for _ in range(self.n_epochs):
            for i in rng.permutation(n):
                xi = rows[i]
                margin = t[i] * (float(xi @ w) + b)
                w *= decay
                if margin < 1.0:
                    w += (eta * t[i]) * xi
                    b += eta * t[i]
        self.coef_ = w
        self.intercept_ = b
        return self

    def decision_function(self, X):
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)
