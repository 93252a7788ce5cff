"""Per-component shape statistics."""
from dataclasses import astuple, dataclass, fields

import numpy as np

HEIGHT_BIN = 0.10
ACC_BIN = 1.0


@dataclass(frozen=True)
class FeatureVector:
    height_mean: float
    height_std: float
    height_max: float
    height_min: float
    height_mode: float
    acc_mean: float
    acc_std: float
    acc_max: float
    acc_min: float
    acc_mode: float
    surface: float

    def as_array(self):
        return np.array(astuple(self), dtype=np.float64)


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


def histogram_mode(values, width):
    """Mode from a histogram of ``width`` bins anchored at 0.

    The most populated bin wins (ties go to the lower bin); the mode is
    the mean of the samples in it, so it always lies within [min, max].
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("mode of an empty sample")
    # the small nudge keeps values sitting on a bin edge (1.5 / 0.1) in the upper bin
    idx = np.floor(values / width + 1e-9).astype(np.int64)
    uniq, counts = np.unique(idx, return_counts=True)
    best = uniq[np.argmax(counts)]
    return float(values[idx == best].mean())


def _stats(v, width):
    return [float(v.mean()), float(v.std()), float(v.max()), float(v.min()), histogram_mode(v, width)]


def extract_features(pixels, heights, accumulation, frame=None):
    """FeatureVector of one component.

    ``pixels`` is a boolean mask or a ``(rows, cols)`` pair; ``heights`` and
    ``accumulation`` are rasters (or arrays) on the same frame.
    """
    frame = frame or heights.frame
    h = np.asarray(getattr(heights, "values", heights))
    a = np.asarray(getattr(accumulation, "values", accumulation))
    if isinstance(pixels, tuple):
        rows, cols = pixels
    else:
        rows, cols = np.nonzero(pixels)
    if len(rows) == 0:
        raise ValueError("component has no pixel")
    hv, av = h[rows, cols], a[rows, cols]
    surface = len(rows) / frame.resolution**2
    return FeatureVector(*_stats(hv, HEIGHT_BIN), *_stats(av, ACC_BIN), surface)


def extract_all(components, heights, accumulation, frame=None):
    """(component ids, n x 11 matrix) for every non-zero label of ``components``."""
    components = np.asarray(components)
    ids = np.unique(components[components > 0])
    order = np.argsort(components.ravel(), kind="stable")
    flat = components.ravel()[order]
    starts = np.searchsorted(flat, ids)
    stops = np.searchsorted(flat, ids, side="right")
    width = components.shape[1]
    rows = []
    for s, e in zip(starts, stops):
        pix = order[s:e]
        rows.append(extract_features((pix // width, pix % width), heights, accumulation, frame).as_array())
    matrix = np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return ids.astype(np.int64), matrix
