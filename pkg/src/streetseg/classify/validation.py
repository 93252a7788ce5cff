"""Stratified K-fold evaluation and confusion matrices."""
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .lda import LDAModel

CLASSES = ("Car", "Lamppost", "Pedestrian", "Rest")


class FoldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts and row percentages, true class by row, predicted by column."""

    counts: np.ndarray
    classes: tuple = CLASSES

    @property
    def percent(self):
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(rows > 0, 100.0 * self.counts / np.maximum(rows, 1), 0.0)
        return pct

    @property
    def class_counts(self):
        return self.counts.sum(axis=1)

    @property
    def total_error(self):
        total = self.counts.sum()
        return 100.0 * (1.0 - np.trace(self.counts) / total) if total else 0.0

    @property
    def accuracy(self):
        return 100.0 - self.total_error

    def to_csv(self):
        lines = ["class," + ",".join(self.classes) + ",count"]
        for name, row, n in zip(self.classes, self.percent, self.class_counts):
            lines.append(name + "," + ",".join(f"{v:.2f}" for v in row) + f",{int(n)}")
        return "\n".join(lines) + "\n"

    def to_text(self):
        width = max(len(c) for c in self.classes) + 2
        head = " " * width + "".join(f"{c:>{width}}" for c in self.classes)
        lines = [head]
        for name, row in zip(self.classes, self.percent):
            lines.append(f"{name:<{width}}" + "".join(f"{v:>{width}.2f}" for v in row))
        lines.append(f"total error: {self.total_error:.2f}%")
        return "\n".join(lines) + "\n"


def confusion(y_true, y_pred, classes=CLASSES):
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, tuple(classes))


def cross_validate(X, y, K=10, seed=42, classes=CLASSES, model_factory=LDAModel):
    """Stratified K-fold predictions aggregated into a confusion matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if K < 2:
        raise FoldError("K must be >= 2")
    unknown = set(y.tolist()) - set(classes)
    if unknown:
        raise ValueError(f"unknown classes {sorted(unknown)}")
    for c in np.unique(y):
        n_c = int((y == c).sum())
        if n_c < K:
            raise FoldError(f"class {c!r} has {n_c} samples, fewer than K = {K} folds")
    pred = np.empty(len(y), dtype=object)
    folds = StratifiedKFold(n_splits=K, shuffle=True, random_state=seed)
    for train, test in folds.split(X, y):
        model = model_factory().fit(X[train], y[train])
        pred[test] = model.predict(X[test])
    return confusion(y, pred, classes)
