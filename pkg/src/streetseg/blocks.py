"""Cut a street into building blocks along its dominant facade line.

The facade direction comes from a Hough transform weighted by range values;
the max-height profile along that line is median filtered and segmented by a
1-D marker watershed, and every boundary becomes a perpendicular cut.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels, morpho

THETA_STEP_DEG = 0.5
BAND_HALFWIDTH = 2.0
SMOOTH_WINDOW = 11
MIN_DEPTH = 3.0


@dataclass(frozen=True)
class FacadeLine:
    """Line ``x cos(theta) + y sin(theta) = rho`` in pixel units of ``frame``.

    Pixel coordinates are measured from the raster origin corner, so the
    centre of pixel (col, row) is at ``(col + 0.5, row + 0.5)``.  Arc length
    runs along ``(-sin(theta), cos(theta))`` and is reported in metres.
    """

    theta: float
    rho: float
    score: float
    frame: object

    def __post_init__(self):
        if not 0 <= self.theta < np.pi:
            raise ValueError("theta must lie in [0, pi)")
        if not self.score > 0:
            raise ValueError("score must be > 0")

    def _uv(self, points):
        points = np.asarray(points, dtype=np.float64)
        f = self.frame
        return (points[:, 0] - f.origin_x) * f.resolution, (points[:, 1] - f.origin_y) * f.resolution

    def arc_length(self, points):
        """Signed position of each world point along the line, in metres."""
        u, v = self._uv(points)
        return (-u * np.sin(self.theta) + v * np.cos(self.theta)) / self.frame.resolution

    def offset(self, points):
        """Signed perpendicular distance of world points from the line, in metres."""
        u, v = self._uv(points)
        return (u * np.cos(self.theta) + v * np.sin(self.theta) - self.rho) / self.frame.resolution


@dataclass(frozen=True, eq=False)
class HeightProfile:
    positions: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        hts = np.asarray(self.heights, dtype=np.float64)
        if pos.shape != hts.shape or pos.ndim != 1:
            raise ValueError("positions and heights must be matching 1-D arrays")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "heights", hts)

    def __len__(self):
        return self.positions.size


@dataclass(frozen=True)
class BlockCut:
    position: float


def _pixel_centres(frame):
    cols, rows = np.meshgrid(np.arange(frame.width) + 0.5, np.arange(frame.height) + 0.5)
    return cols, rows


def hough_accumulator(raster, theta_step_deg=THETA_STEP_DEG, kernels=None):
    """Return (thetas, rho offset, accumulator) voting each valid pixel with its value."""
    kernels = kernels or _kernels.ACTIVE
    n_theta = int(round(180.0 / theta_step_deg))
    thetas = np.arange(n_theta) * np.deg2rad(theta_step_deg)
    xs, ys = _pixel_centres(raster.frame)
    sel = raster.valid & (raster.values > 0)
    diag = int(np.ceil(np.hypot(raster.frame.width, raster.frame.height))) + 1
    acc = kernels.hough_vote(
        np.ascontiguousarray(xs[sel]),
        np.ascontiguousarray(ys[sel]),
        np.ascontiguousarray(raster.values[sel]),
        np.cos(thetas),
        np.sin(thetas),
        2 * diag + 1,
        diag,
    )
    return thetas, diag, acc


def detect_facade_line(raster, theta_step_deg=THETA_STEP_DEG, kernels=None):
    """Strongest line of a range image under a height-weighted Hough transform.

    Bins are ``theta_step_deg`` in angle and 1 px in rho; the first maximal
    cell in (theta, rho) order wins.
    """
    if not raster.valid.any():
        raise ValueError("range image has no valid pixel")
    thetas, offset, acc = hough_accumulator(raster, theta_step_deg, kernels)
    t, b = np.unravel_index(int(np.argmax(acc)), acc.shape)
    score = float(acc[t, b])
    if score <= 0:
        raise ValueError("range image carries no positive weight")
    return FacadeLine(float(thetas[t]), float(b - offset), score, raster.frame)


def extract_profile(raster, line, band_halfwidth=BAND_HALFWIDTH):
    """Max valid range value per unit arc-length step inside a band around ``line``.

    The profile spans every pixel the line passes through; steps with no
    valid pixel in the band read 0.
    """
    if band_halfwidth <= 0:
        raise ValueError("band_halfwidth must be > 0")
    frame = raster.frame
    xs, ys = _pixel_centres(frame)
    c, s = np.cos(line.theta), np.sin(line.theta)
    d = xs * c + ys * s - line.rho
    arc = -xs * s + ys * c
    on_line = np.abs(d) <= 0.5
    if not on_line.any():
        raise ValueError("facade line does not cross the raster")
    start = arc[on_line].min()
    n = int(np.floor(arc[on_line].max() - start + 0.5)) + 1
    k = np.floor(arc - start + 0.5).astype(np.int64)
    band = raster.valid & (np.abs(d) <= band_halfwidth * frame.resolution) & (k >= 0) & (k < n)
    heights = np.zeros(n)
    np.maximum.at(heights, k[band], raster.values[band])
    positions = (start + np.arange(n)) / frame.resolution
    return HeightProfile(positions, heights)


def smooth_profile(profile, window=SMOOTH_WINDOW):
    """Median filter with reflected edges."""
    window = int(window)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd count >= 1")
    if window == 1:
        return profile
    return HeightProfile(profile.positions, ndimage.median_filter(profile.heights, size=window, mode="reflect"))


def cut_profile(profile, min_depth=MIN_DEPTH):
    """Cuts between basins of a 1-D watershed seeded on the surviving maxima.

    Maxima shallower than ``min_depth`` are removed with h-maxima first; the
    watershed floods the inverted profile, so each cut sits in the low stretch
    separating two retained maxima.
    """
    if min_depth <= 0:
        raise ValueError("min_depth must be > 0")
    if len(profile) < 2:
        return []
    f = profile.heights[None, :]
    filtered = morpho.h_maxima(f, min_depth, morpho.SQUARE8)
    markers = morpho.regional_maxima(filtered, morpho.SQUARE8)
    if markers.max() < 2:
        return []
    basins = morpho.watershed(f.max() - f, markers, morpho.SQUARE8)[0]
    change = np.flatnonzero(basins[1:] != basins[:-1])
    pos = profile.positions
    return [BlockCut(float(0.5 * (pos[k] + pos[k + 1]))) for k in change]


def block_index(cloud, line, cuts):
    """Block number of every point; points exactly on a cut go to the later block."""
    positions = np.array([c.position for c in cuts], dtype=np.float64)
    if positions.size > 1 and np.any(np.diff(positions) <= 0):
        raise ValueError("cuts must be strictly increasing")
    points = getattr(cloud, "points", cloud)
    return np.searchsorted(positions, line.arc_length(points), side="right")


def split_blocks(cloud, line, cuts):
    """Partition ``cloud`` at the cut positions, keeping point order per block."""
    if not cuts:
        return [cloud]
    idx = block_index(cloud, line, cuts)
    return [cloud.subset(np.flatnonzero(idx == b)) for b in range(len(cuts) + 1)]
