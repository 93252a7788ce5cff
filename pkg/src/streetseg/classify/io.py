"""CSV exports for features, labels, selection traces and confusion matrices."""
import csv

import numpy as np

from .features import FEATURE_NAMES


def _g(v):
    return format(float(v), ".10g")


def write_features(path, ids, X, labels=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component_id", *FEATURE_NAMES, "label"])
        for i, cid in enumerate(ids):
            label = "" if labels is None else labels.get(int(cid), "")
            w.writerow([int(cid), *(_g(v) for v in X[i]), label])


def read_features(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ids = np.array([int(r["component_id"]) for r in rows], dtype=np.int64)
    X = np.array([[float(r[n]) for n in FEATURE_NAMES] for r in rows]).reshape(len(rows), len(FEATURE_NAMES))
    labels = {int(r["component_id"]): r["label"] for r in rows if r.get("label")}
    return ids, X, labels


def read_labels(path):
    """``component_id,class`` CSV into a dict."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"component_id", "class"} <= set(reader.fieldnames):
            raise ValueError("labels CSV needs a 'component_id,class' header")
        return {int(r["component_id"]): r["class"].strip() for r in reader}


def write_labels(path, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component_id", "class"])
        for cid in sorted(labels):
            w.writerow([cid, labels[cid]])


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "feature", "lambda", "p_value", "selected"])
        for i, s in enumerate(trace.steps, 1):
            w.writerow([i, s.feature, _g(s.wilks), _g(s.p_value), int(i <= len(trace.selected))])


def write_confusion(stem, matrix):
    with open(f"{stem}.csv", "w") as fh:
        fh.write(matrix.to_csv())
    with open(f"{stem}.txt", "w") as fh:
        fh.write(matrix.to_text())
