"""Ground-level artifact detection and separation.

Inside the ground mask the range image is inverted so artifacts become pits;
a one-pixel rim at the inverted maximum closes the mask, and the fill top-hat
of that image, thresholded, is the artifact height map.  Touching artifacts
are then split by a watershed of the gradient seeded on the maxima that
survive an area opening and an h-maxima filter.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import morpho
from .raster import HEIGHT

THRESHOLD = 0.10
H = 0.10
AREA_PX = 25
MIN_PX = 10
MIN_ACC = 3


@dataclass(frozen=True, eq=False)
class ArtifactMap:
    """``heights`` holds top-hat values on artifact pixels (its valid mask).

    ``components`` is 0 until :func:`separate_components` has run.
    """

    heights: object
    ground_marker: np.ndarray
    mask: np.ndarray
    components: np.ndarray = None
    threshold: float = THRESHOLD

    @property
    def artifacts(self):
        return self.heights.valid

    @property
    def n_components(self):
        return 0 if self.components is None else int(self.components.max())


def _dense(labels):
    """Renumber non-zero labels 1..k in raster order of first pixel."""
    flat = labels.ravel()
    nz = flat[flat > 0]
    if nz.size == 0:
        return np.zeros_like(labels, dtype=np.int32)
    uniq, first = np.unique(nz, return_index=True)
    lut = np.zeros(int(uniq.max()) + 1, dtype=np.int32)
    lut[uniq[np.argsort(first)]] = np.arange(1, uniq.size + 1, dtype=np.int32)
    return lut[labels]


def inverted_image(mask, border_mode="global", border_radius=5):
    """Inverted masked range image plus its one-pixel rim.

    Returns ``(image, domain, rim)``.  With ``border_mode="global"`` the rim
    sits at the inverted maximum (the lowest ground height).  ``"local"`` gives
    each rim pixel the largest inverted value within ``border_radius`` pixels,
    which keeps the rim on the local ground level of a sloped street.
    """
    m = mask.mask
    if not m.any():
        raise ValueError("ground mask is empty")
    v = mask.filled_range.values
    top = v[m].max()
    inv = np.where(m, top - v, 0.0)
    rim = ndimage.binary_dilation(m, np.ones((3, 3), bool)) & ~m
    if border_mode == "global":
        rim_value = np.full(m.shape, inv[m].max())
    elif border_mode == "local":
        size = 2 * int(border_radius) + 1
        rim_value = ndimage.maximum_filter(np.where(m, inv, -np.inf), size=size, mode="constant", cval=-np.inf)
        rim_value = np.where(np.isfinite(rim_value), rim_value, inv[m].max())
    else:
        raise ValueError(f"unknown border_mode {border_mode!r}")
    image = np.where(rim, rim_value, inv)
    return image, m | rim, rim


def detect_artifacts(mask, threshold=THRESHOLD, se=morpho.SQUARE8, border_mode="global", border_radius=5):
    """Threshold the fill top-hat of the inverted ground image.

    The rim (and any mask pixel on the image border) anchors the fill; pixels
    whose top-hat exceeds ``threshold`` strictly are artifacts.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    image, domain, rim = inverted_image(mask, border_mode, border_radius)
    anchor = rim | (morpho.border_pixels(image.shape) & domain)
    top = image[domain].max()
    marker = np.where(anchor, image, top)
    g = morpho.reconstruct_by_erosion(marker, image, se, domain)
    fth = np.where(mask.mask, g - image, 0.0)
    art = mask.mask & (fth > threshold)
    heights = mask.filled_range.replace(values=np.where(art, fth, 0.0), valid=art, kind=HEIGHT)
    return ArtifactMap(heights, mask.mask & ~art, mask.mask.copy(), None, threshold)


def top_hat(mask, se=morpho.SQUARE8, border_mode="global", border_radius=5):
    """Unthresholded top-hat image on the mask (for debug dumps)."""
    image, domain, rim = inverted_image(mask, border_mode, border_radius)
    anchor = rim | (morpho.border_pixels(image.shape) & domain)
    marker = np.where(anchor, image, image[domain].max())
    g = morpho.reconstruct_by_erosion(marker, image, se, domain)
    return np.where(mask.mask, g - image, 0.0)


def separate_components(amap, area_px=AREA_PX, h=H, se=morpho.SQUARE8):
    """Split artifact pixels into components by a marker watershed.

    Heights are handled in integer millimetres.  Area opening and h-maxima
    run on the artifact pixels only, so a blob too small for the area opening
    still keeps one flat maximum and hence a marker.  The background marker is
    the whole ground marker; any artifact pixel the background floods is
    handed back to the nearest artifact basin by a second watershed.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    if area_px < 1:
        raise ValueError("area_px must be >= 1")
    art = amap.artifacts
    if not art.any():
        return replace(amap, components=np.zeros(art.shape, dtype=np.int32))
    f = np.round(np.where(art, amap.heights.values, 0.0) * 1000.0)
    f = morpho.area_opening(f, area_px, se, art)
    f = morpho.h_maxima(f, round(h * 1000.0), se, art)
    f = np.where(art, f, 0.0)
    markers = morpho.regional_maxima(f, se, art).astype(np.int32)
    background = int(markers.max()) + 1
    markers[amap.ground_marker] = background
    domain = amap.mask
    grad = morpho.gradient(f, se, domain)
    basins = morpho.watershed(grad, markers, se, domain, quantum=1.0)
    labels = np.where(art & (basins != background), basins, 0)
    lost = art & (labels == 0)
    if lost.any():
        seeds = np.where(art, labels, 0)
        if seeds.any():
            again = morpho.watershed(grad, seeds, se, art, quantum=1.0)
            labels = np.where(lost, again, labels)
        # a blob without any surviving seed becomes its own component
        still = art & (labels == 0)
        if still.any():
            blobs, _ = ndimage.label(still, np.ones((3, 3), bool))
            labels = np.where(still, blobs + labels.max(), labels)
    return replace(amap, components=_dense(labels))


def filter_small(amap, accumulation, min_px=MIN_PX, min_acc=MIN_ACC):
    """Drop components under ``min_px`` pixels or whose max point count is under ``min_acc``."""
    comp = amap.components
    if comp is None:
        raise ValueError("separate_components has not run")
    n = int(comp.max())
    if n == 0:
        return amap
    acc = np.asarray(getattr(accumulation, "values", accumulation))
    size = np.bincount(comp.ravel(), minlength=n + 1)
    peak = np.zeros(n + 1)
    np.maximum.at(peak, comp.ravel(), acc.ravel())
    drop = (size < min_px) | (peak < min_acc)
    drop[0] = False
    removed = drop[comp]
    heights = amap.heights.replace(valid=amap.heights.valid & ~removed)
    return replace(
        amap,
        heights=heights,
        ground_marker=amap.ground_marker | removed,
        components=_dense(np.where(removed, 0, comp)),
    )
