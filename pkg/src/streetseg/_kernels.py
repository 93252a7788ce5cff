"""Backend dispatch for the point-wise kernels in :mod:`streetseg._loops`."""
from types import SimpleNamespace

import numpy as np

from . import _backend, _loops


def _np_project_points(cols, rows, z, height, width):
    flat = rows * width + cols
    acc = np.bincount(flat, minlength=height * width).astype(np.int64)
    rng = np.full(height * width, -np.inf)
    np.maximum.at(rng, flat, z)
    rng[acc == 0] = 0.0
    return rng.reshape(height, width), acc.reshape(height, width)


def _np_hough_vote(xs, ys, weights, cos_t, sin_t, n_rho, rho_offset):
    acc = np.zeros((cos_t.shape[0], n_rho), dtype=np.float64)
    for t in range(cos_t.shape[0]):
        b = np.floor(xs * cos_t[t] + ys * sin_t[t] + 0.5).astype(np.int64) + rho_offset
        ok = (b >= 0) & (b < n_rho)
        acc[t] = np.bincount(b[ok], weights=weights[ok], minlength=n_rho)
    return acc


def _build(backend):
    if backend == "numba":
        kc = _backend.compile_kernel
        return SimpleNamespace(
            name="numba",
            project_points=kc(_loops.project_points),
            hough_vote=kc(_loops.hough_vote),
        )
    return SimpleNamespace(name="numpy", project_points=_np_project_points, hough_vote=_np_hough_vote)


NUMPY = _build("numpy")
NUMBA = _build("numba") if _backend.HAVE_NUMBA else None
ACTIVE = NUMBA if _backend.BACKEND == "numba" else NUMPY
