"""Wilks' Lambda and stepwise forward feature selection."""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc


class SingularScatterError(ValueError):
    def __init__(self, features):
        self.features = tuple(features)
        super().__init__(f"within-class scatter is singular for features {list(self.features)}")


def scatter_matrices(X, y):
    """Within-class and total scatter (sums of squares and cross-products)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    centred = X - X.mean(axis=0)
    T = centred.T @ centred
    W = np.zeros_like(T)
    for g in np.unique(y):
        Xg = X[np.asarray(y) == g]
        d = Xg - Xg.mean(axis=0)
        W += d.T @ d
    return W, T


def _logdet(M, names):
    d = np.sqrt(np.diag(M))
    if np.any(d <= 0):
        raise SingularScatterError(names)
    C = M / np.outer(d, d)
    # judge singularity on the correlation scale so units do not matter
    if np.linalg.eigvalsh(C).min() < 1e-10:
        raise SingularScatterError(names)
    return np.linalg.slogdet(C)[1] + 2 * np.log(d).sum()


def wilks_lambda(X, y, names=None):
    """``det(W) / det(T)`` in (0, 1]; smaller means better separated classes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    g = len(np.unique(y))
    names = names if names is not None else list(range(k))
    if n <= k + g:
        raise ValueError(f"need more than k + g = {k + g} samples, got {n}")
    W, T = scatter_matrices(X, y)
    return float(np.exp(_logdet(W, names) - _logdet(T, names)))


def f_sf(F, d1, d2):
    """Upper tail of the F(d1, d2) distribution via the regularized incomplete beta."""
    if F <= 0:
        return 1.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F)))


def partial_f(lam_before, lam_after, n, g, k):
    """Partial F for adding one variable to ``k`` already selected, and its dof."""
    d1, d2 = g - 1, n - g - k
    F = (lam_before / lam_after - 1.0) * d2 / d1
    return F, d1, d2


@dataclass(frozen=True)
class Step:
    feature: str
    wilks: float
    F: float
    p_value: float


@dataclass(frozen=True)
class SelectionTrace:
    steps: tuple
    selected: tuple
    p_cutoff: float
    skipped: tuple = field(default=())

    @property
    def order(self):
        return tuple(s.feature for s in self.steps)


def stepwise_select(X, y, p_cutoff=0.01, names=None):
    """Greedy forward selection on Wilks' Lambda.

    Every step adds the candidate that minimizes Lambda of the enlarged set;
    the trace continues until no candidate can be added, and ``selected`` is
    the longest prefix whose partial-F p-values stay within ``p_cutoff``.
    Candidates that make the scatter singular are skipped and listed in
    ``skipped`` as ``(step, feature)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, k_all = X.shape
    g = len(np.unique(y))
    if g < 2:
        raise ValueError("stepwise selection needs at least two classes")
    names = list(names) if names is not None else [str(i) for i in range(k_all)]
    chosen, steps, skipped = [], [], []
    lam = 1.0
    while len(chosen) < k_all and n > len(chosen) + 1 + g:
        best = None
        for j in range(k_all):
            if j in chosen:
                continue
            cols = chosen + [j]
            try:
                cand = wilks_lambda(X[:, cols], y, [names[c] for c in cols])
            except SingularScatterError:
                skipped.append((len(steps), names[j]))
                continue
            if best is None or cand < best[0]:
                best = (cand, j)
        if best is None:
            break
        F, d1, d2 = partial_f(lam, best[0], n, g, len(chosen))
        steps.append(Step(names[best[1]], best[0], F, f_sf(F, d1, d2)))
        chosen.append(best[1])
        lam = best[0]
    selected = []
    for s in steps:
        if s.p_value > p_cutoff:
            break
        selected.append(s.feature)
    return SelectionTrace(tuple(steps), tuple(selected), p_cutoff, tuple(skipped))
