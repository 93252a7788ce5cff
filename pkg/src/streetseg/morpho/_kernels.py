"""Backend dispatch for the morphology kernels.

``NUMBA`` and ``NUMPY`` are namespaces exposing the same five kernels; the
module-level names point at whichever one ``STREETSEG_BACKEND`` selected.
"""
from types import SimpleNamespace

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .. import _backend
from . import _loops


def _shifted_pairs(shape, dr, dc):
    """Yield (dst, src) slice pairs so that ``a[src]`` is the neighbour of ``a[dst]``."""
    h, w = shape
    for di, dj in zip(dr, dc):
        di, dj = int(di), int(dj)
        dst = (slice(max(0, -di), h - max(0, di)), slice(max(0, -dj), w - max(0, dj)))
        src = (slice(max(0, di), h - max(0, -di)), slice(max(0, dj), w - max(0, -dj)))
        yield dst, src


def _np_reconstruct_dilate(marker, mask, domain, dr, dc):
    out = np.where(domain, np.minimum(marker, mask), marker)
    work = np.where(domain, out, -np.inf)
    while True:
        grown = work.copy()
        for dst, src in _shifted_pairs(work.shape, dr, dc):
            np.maximum(grown[dst], work[src], out=grown[dst])
        grown = np.where(domain, np.minimum(grown, mask), -np.inf)
        if np.array_equal(grown, work):
            break
        work = grown
    return np.where(domain, work, marker)


def _np_label_zones(f, domain, lam, dr, dc):
    h, w = f.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols = [], []
    for dst, src in _shifted_pairs(f.shape, dr, dc):
        ok = domain[dst] & domain[src] & (np.abs(f[dst] - f[src]) <= lam)
        rows.append(idx[dst][ok])
        cols.append(idx[src][ok])
    rows = np.concatenate(rows) if rows else np.empty(0, np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, np.int64)
    graph = sparse.coo_matrix((np.ones(rows.size, np.int8), (rows, cols)), shape=(h * w, h * w))
    _, comp = csgraph.connected_components(graph, directed=False)
    flat_dom = domain.ravel()
    comp_dom = comp[flat_dom]
    _, first = np.unique(comp_dom, return_index=True)
    rank = np.empty(comp.max() + 1, dtype=np.int32)
    order = np.argsort(first, kind="stable")
    rank[comp_dom[first[order]]] = np.arange(1, order.size + 1, dtype=np.int32)
    labels = np.zeros(h * w, dtype=np.int32)
    labels[flat_dom] = rank[comp_dom]
    return labels.reshape(h, w)


def _build(backend):
    if backend == "numba":
        kc = _backend.compile_kernel
        return SimpleNamespace(
            name="numba",
            reconstruct_dilate=kc(_loops.reconstruct_dilate),
            label_zones=kc(_loops.label_zones),
            area_open=kc(_loops.area_open),
            watershed_flood=kc(_loops.watershed_flood),
        )
    return SimpleNamespace(
        name="numpy",
        reconstruct_dilate=_np_reconstruct_dilate,
        label_zones=_np_label_zones,
        area_open=_loops.area_open,
        watershed_flood=_loops.watershed_flood,
    )


NUMPY = _build("numpy")
NUMBA = _build("numba") if _backend.HAVE_NUMBA else None
ACTIVE = NUMBA if _backend.BACKEND == "numba" else NUMPY
