"""Grey-level morphology on 2-D rasters with an optional domain mask.

All operators take a float image ``f`` and an optional boolean ``domain``.
Pixels outside the domain are holes: they are never read as neighbours and
their output value is unspecified (``f`` is copied through for grey outputs,
0 for label outputs).
"""
from enum import Enum

import numpy as np

from . import _kernels


class StructuringElement(Enum):
    """Elementary 3x3 neighbourhood; fixes pixel adjacency."""

    CROSS4 = "cross4"
    SQUARE8 = "square8"

    @property
    def offsets(self):
        if self is StructuringElement.CROSS4:
            dr = [-1, 0, 0, 1]
            dc = [0, -1, 1, 0]
        else:
            dr = [-1, -1, -1, 0, 0, 1, 1, 1]
            dc = [-1, 0, 1, -1, 1, -1, 0, 1]
        return np.array(dr, dtype=np.int64), np.array(dc, dtype=np.int64)

    @property
    def connectivity(self):
        return 1 if self is StructuringElement.CROSS4 else 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"4": cls.CROSS4, "cross4": cls.CROSS4, "8": cls.SQUARE8, "square8": cls.SQUARE8}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown structuring element {value!r}") from None


CROSS4 = StructuringElement.CROSS4
SQUARE8 = StructuringElement.SQUARE8

# quantum used wherever float order matters (watershed priorities)
MM = 1e-3


def _image(f, domain):
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.ndim != 2 or f.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {f.shape}")
    if domain is None:
        domain = np.ones(f.shape, dtype=bool)
    else:
        domain = np.ascontiguousarray(domain, dtype=bool)
        if domain.shape != f.shape:
            raise ValueError(f"domain shape {domain.shape} != image shape {f.shape}")
    return f, domain


def _pair(marker, mask, domain):
    mask, domain = _image(mask, domain)
    marker = np.ascontiguousarray(marker, dtype=np.float64)
    if marker.shape != mask.shape:
        raise ValueError(f"marker shape {marker.shape} != mask shape {mask.shape}")
    return marker, mask, domain


def reconstruct_by_dilation(marker, mask, se=SQUARE8, domain=None):
    """Reconstruct ``mask`` from ``marker <= mask`` by iterated geodesic dilation."""
    marker, mask, domain = _pair(marker, mask, domain)
    if np.any(marker[domain] > mask[domain]):
        raise ValueError("reconstruction by dilation needs marker <= mask")
    dr, dc = se.offsets
    out = _kernels.ACTIVE.reconstruct_dilate(marker, mask, domain, dr, dc)
    return np.where(domain, out, mask)


def reconstruct_by_erosion(marker, mask, se=SQUARE8, domain=None):
    """Reconstruct ``mask`` from ``marker >= mask`` by iterated geodesic erosion."""
    marker, mask, domain = _pair(marker, mask, domain)
    if np.any(marker[domain] < mask[domain]):
        raise ValueError("reconstruction by erosion needs marker >= mask")
    dr, dc = se.offsets
    out = -_kernels.ACTIVE.reconstruct_dilate(-marker, -mask, domain, dr, dc)
    return np.where(domain, out, mask)


def border_pixels(shape):
    border = np.zeros(shape, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    return border


def fill(f, se=SQUARE8, domain=None):
    """Fill holes: remove every regional minimum not connected to the image border.

    The marker equals ``f`` on the border and ``max(f)`` elsewhere; the result
    is its reconstruction by erosion over ``f``.
    """
    f, domain = _image(f, domain)
    top = f[domain].max() if domain.any() else 0.0
    marker = np.where(border_pixels(f.shape) & domain, f, top)
    return reconstruct_by_erosion(marker, f, se, domain)


def fill_top_hat(f, se=SQUARE8, domain=None):
    """``fill(f) - f``; non-negative, zero on the border and outside the domain."""
    f, domain = _image(f, domain)
    g = fill(f, se, domain)
    return np.where(domain, g - f, 0.0)


def quasi_flat_zones(f, lam, se=CROSS4, domain=None):
    """Label the lambda-flat zones of ``f``.

    Two adjacent domain pixels are joined when their values differ by at most
    ``lam``; zones are the connected classes of that relation.  Ids are dense
    from 1 in raster order of first pixel; 0 outside the domain.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    f, domain = _image(f, domain)
    dr, dc = se.offsets
    return _kernels.ACTIVE.label_zones(f, domain, float(lam), dr, dc)


def regional_maxima(f, se=SQUARE8, domain=None):
    """Label connected plateaus with no strictly higher domain neighbour."""
    f, domain = _image(f, domain)
    dr, dc = se.offsets
    plateaus = _kernels.ACTIVE.label_zones(f, domain, 0.0, dr, dc)
    beaten = np.zeros(int(plateaus.max()) + 1, dtype=bool)
    beaten[0] = True
    for dst, src in _kernels._shifted_pairs(f.shape, dr, dc):
        higher = domain[dst] & domain[src] & (f[src] > f[dst])
        beaten[plateaus[dst][higher]] = True
    keep = ~beaten
    ids = np.zeros(beaten.size, dtype=np.int32)
    ids[keep] = np.arange(1, int(keep.sum()) + 1, dtype=np.int32)
    return ids[plateaus]


def area_opening(f, area_px, se=SQUARE8, domain=None):
    """Flatten bright structures whose upper level-set components cover < ``area_px`` pixels."""
    if area_px < 1:
        raise ValueError("area_px must be >= 1")
    f, domain = _image(f, domain)
    if area_px == 1:
        return f.copy()
    dr, dc = se.offsets
    idx = np.flatnonzero(domain)
    order = idx[np.argsort(-f.ravel()[idx], kind="stable")].astype(np.int64)
    out = _kernels.ACTIVE.area_open(f, domain, np.int64(area_px), dr, dc, order)
    return np.where(domain, out, f)


def h_maxima(f, h, se=SQUARE8, domain=None):
    """Suppress maxima of dynamic <= ``h``: reconstruction by dilation of ``f - h``."""
    if h < 0:
        raise ValueError("h must be >= 0")
    f, domain = _image(f, domain)
    if h == 0:
        return f.copy()
    return reconstruct_by_dilation(f - h, f, se, domain)


def dilate(f, se=SQUARE8, domain=None):
    f, domain = _image(f, domain)
    dr, dc = se.offsets
    work = np.where(domain, f, -np.inf)
    out = work.copy()
    for dst, src in _kernels._shifted_pairs(f.shape, dr, dc):
        np.maximum(out[dst], work[src], out=out[dst])
    return np.where(domain, out, f)


def erode(f, se=SQUARE8, domain=None):
    f, domain = _image(f, domain)
    return -dilate(-f, se, domain)


def gradient(f, se=SQUARE8, domain=None):
    """Morphological gradient ``dilate(f) - erode(f)``; 0 outside the domain."""
    f, domain = _image(f, domain)
    return np.where(domain, dilate(f, se, domain) - erode(f, se, domain), 0.0)


def watershed(f, markers, se=SQUARE8, domain=None, quantum=MM):
    """Flood ``f`` from labelled ``markers``; every reachable domain pixel gets one label.

    Priorities are ``round(f / quantum)`` with FIFO order among equal levels and
    row-major seeding, so the result is deterministic.  Marker pixels keep
    their labels; no divide-line label is produced.
    """
    f, domain = _image(f, domain)
    markers = np.asarray(markers)
    if markers.shape != f.shape:
        raise ValueError(f"markers shape {markers.shape} != image shape {f.shape}")
    labels = np.where(domain, markers, 0).astype(np.int32)
    if not labels.any():
        raise ValueError("watershed needs at least one non-zero marker inside the domain")
    prio = np.round(np.where(domain, f, 0.0) / quantum).astype(np.int64)
    dr, dc = se.offsets
    return _kernels.ACTIVE.watershed_flood(prio, labels, domain, dr, dc)
