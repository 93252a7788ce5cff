"""Facade / ground separation on the range image.

Occlusion shadows leave the ground region split or holed.  Components of the
valid domain are first joined by straight links to their nearest neighbour,
every enclosed basin of missing data is then filled from its own collar, and
the ground is the largest lambda-flat zone plus whatever it encloses.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import morpho
from .cloud import FACADE, GROUND

log = logging.getLogger(__name__)

LAMBDA = 1.0
GROUND_ID = 1
FACADE_ID = 2
LABEL_MAP = {GROUND_ID: GROUND, FACADE_ID: FACADE}


@dataclass(frozen=True, eq=False)
class GroundMask:
    mask: np.ndarray
    filled_range: object

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool, copy=True)
        if mask.shape != self.filled_range.shape:
            raise ValueError("mask does not match the filled range image")
        if np.any(mask & ~self.filled_range.valid):
            raise ValueError("mask must lie inside the valid domain")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)


def _structure(se):
    return ndimage.generate_binary_structure(2, se.connectivity)


def _boundary(valid):
    """Valid pixels with an invalid or off-image 4-neighbour."""
    padded = np.pad(valid, 1, constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return valid & ~interior


def digital_line(p, q):
    """4-connected pixel path from ``p`` to ``q`` (both included), as (row, col) pairs."""
    (r0, c0), (r1, c1) = p, q
    dr, dc = r1 - r0, c1 - c0
    sr, sc = (1 if dr >= 0 else -1), (1 if dc >= 0 else -1)
    nr, nc = abs(dr), abs(dc)
    path = [(r0, c0)]
    r, c = r0, c0
    i = j = 0
    while i < nr or j < nc:
        # step along whichever axis keeps the path closer to the ideal segment
        if j < nc and (i >= nr or (2 * j + 1) * nr < (2 * i + 1) * nc):
            c += sc
            j += 1
        else:
            r += sr
            i += 1
        path.append((r, c))
    return path


def _nearest_link(points, group, g):
    """Closest (dist, other group, p, q) between group ``g`` and any other group."""
    own = group == g
    tree = cKDTree(points[~own])
    others = np.flatnonzero(~own)
    d, k = tree.query(points[own])
    dmin = d.min()
    best = None
    own_idx = np.flatnonzero(own)
    for i in np.flatnonzero(d <= dmin + 1e-9):
        for kk in tree.query_ball_point(points[own_idx[i]], dmin + 1e-9):
            q = others[kk]
            cand = (int(group[q]), int(own_idx[i]), int(q))
            if best is None or cand < best:
                best = cand
    return dmin, best[0], best[1], best[2]


def link_regions(raster, se=morpho.CROSS4):
    """Join the valid components with straight interpolated links until connected.

    Each round every component links to its nearest other component (closest
    boundary-pixel pair, ties to the smaller component id); linked pixels that
    were invalid take values interpolated between the two endpoint heights.
    """
    valid = raster.valid.copy()
    values = raster.values.copy()
    comp, n = ndimage.label(valid, _structure(se))
    if n <= 1:
        return raster
    edge = _boundary(valid)
    rr, cc = np.nonzero(edge)
    points = np.column_stack([rr, cc]).astype(np.float64)
    group = comp[rr, cc].astype(np.int64)
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    links = 0
    while len(np.unique(group)) > 1:
        chosen = {}
        for g in np.unique(group):
            _, other, i, j = _nearest_link(points, group, g)
            key = (min(g, other), max(g, other))
            chosen.setdefault(key, (i, j))
        for key in sorted(chosen):
            a, b = find(key[0]), find(key[1])
            if a == b:
                continue
            parent[max(a, b)] = min(a, b)
            i, j = chosen[key]
            p = (int(rr[i]), int(cc[i]))
            q = (int(rr[j]), int(cc[j]))
            path = digital_line(p, q)
            vp, vq = values[p], values[q]
            steps = len(path) - 1
            for k, px in enumerate(path):
                if not valid[px]:
                    valid[px] = True
                    values[px] = vp + (vq - vp) * k / steps
            if abs(vq - vp) / max(steps, 1) > LAMBDA:
                log.info("link %s-%s is steeper than %.2f m/px", p, q, LAMBDA)
            links += 1
        group = np.array([find(g) for g in group])
    log.debug("link_regions drew %d links between %d components", links, n)
    return raster.replace(values=values, valid=valid)


def fill_gaps(raster, se=morpho.SQUARE8):
    """Fill every enclosed basin of invalid pixels from its own neighbourhood.

    A basin is an 8-connected invalid component not touching the image
    border.  It is filled with the hole-filling reconstruction computed in its
    bounding box grown by one pixel, over the basin and the valid pixels there.
    """
    valid = raster.valid
    n_dom = ndimage.label(valid, _structure(se))[1]
    if n_dom > 1:
        raise ValueError(f"valid domain has {n_dom} components; run link_regions first")
    basins, n = ndimage.label(~valid, np.ones((3, 3), bool))
    if n == 0:
        return raster
    border = morpho.border_pixels(valid.shape)
    touching = np.unique(basins[border & ~valid])
    values = raster.values.copy()
    new_valid = valid.copy()
    for b, sl in enumerate(ndimage.find_objects(basins), 1):
        if b in touching:
            continue
        r0, r1 = max(sl[0].start - 1, 0), min(sl[0].stop + 1, valid.shape[0])
        c0, c1 = max(sl[1].start - 1, 0), min(sl[1].stop + 1, valid.shape[1])
        win = (slice(r0, r1), slice(c0, c1))
        hole = basins[win] == b
        dom = valid[win] | hole
        f = np.where(hole, -1.0, raster.values[win])
        g = morpho.fill(f, se, dom)
        values[win][hole] = np.maximum(g[hole], 0.0)
        new_valid[win] |= hole
    return raster.replace(values=values, valid=new_valid)


def segment_ground(filled, lam=LAMBDA, se=morpho.CROSS4):
    """Largest lambda-flat zone of ``filled`` plus every zone it encloses."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    zones = morpho.quasi_flat_zones(filled.values, lam, se, filled.valid)
    if zones.max() == 0:
        raise ValueError("range image has no valid pixel to segment")
    sizes = np.bincount(zones.ravel())
    sizes[0] = 0
    seed = zones == int(np.argmax(sizes))
    # the seed is connected under ``se``; enclosed background uses the dual adjacency
    dual = np.ones((3, 3), bool) if se.connectivity == 1 else ndimage.generate_binary_structure(2, 1)
    enclosed = ndimage.binary_fill_holes(seed, structure=dual)
    return GroundMask(enclosed & filled.valid, filled)


def facade_ground_labels(mask):
    """GROUND_ID on the mask, FACADE_ID on the other valid pixels, 0 elsewhere."""
    labels = np.zeros(mask.mask.shape, dtype=np.int32)
    labels[mask.filled_range.valid] = FACADE_ID
    labels[mask.mask] = GROUND_ID
    return labels


def complete(raster, lam=LAMBDA, zone_se=morpho.CROSS4, fill_se=morpho.SQUARE8):
    """Link, fill and segment in one call."""
    filled = fill_gaps(link_regions(raster, zone_se), fill_se)
    return segment_ground(filled, lam, zone_se)
