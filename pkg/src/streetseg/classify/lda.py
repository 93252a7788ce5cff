"""Regularized linear discriminant classifier."""
import numpy as np


class Classifier:
    """Minimal interface for the classifiers used by cross-validation."""

    def fit(self, X, y):
        raise NotImplementedError

    def predict(self, X):
        raise NotImplementedError


class LDAModel(Classifier):
    """Shared-covariance Gaussian discriminant with a ridge ``eps * I``.

    ``eps = 1e-6 * trace(S) / k`` for the pooled covariance ``S``.  Training
    rows are sorted before fitting, so the model does not depend on their
    storage order.
    """

    def __init__(self, reg=1e-6):
        self.reg = reg

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be n x k with one label per row")
        order = np.lexsort(tuple(X.T[::-1]) + (y.astype(str),)) if X.shape[1] else np.argsort(y.astype(str))
        X, y = X[order], y[order]
        n, k = X.shape
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        means, priors = [], []
        S = np.zeros((k, k))
        for c in self.classes_:
            Xc = X[y == c]
            if len(Xc) < k + 1:
                raise ValueError(f"class {c!r} has {len(Xc)} samples, needs at least {k + 1}")
            mu = Xc.mean(axis=0)
            d = Xc - mu
            S += d.T @ d
            means.append(mu)
            priors.append(len(Xc) / n)
        S /= max(n - len(self.classes_), 1)
        eps = self.reg * np.trace(S) / k if np.trace(S) > 0 else self.reg
        cov = S + eps * np.eye(k)
        self.means_ = np.array(means)
        self.priors_ = np.array(priors)
        coef = np.linalg.solve(cov, self.means_.T).T
        self.coef_ = coef
        self.intercept_ = -0.5 * np.einsum("ij,ij->i", coef, self.means_) + np.log(self.priors_)
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.coef_.T + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def train_classifier(X, y):
    return LDAModel().fit(X, y)
