"""Top-down virtual camera: frames, rasters, projection and block downsampling."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

RANGE = "range"
ACCUMULATION = "accumulation"
HEIGHT = "height"
KINDS = (RANGE, ACCUMULATION, HEIGHT)

DEFAULT_RESOLUTION = 20.0


@dataclass(frozen=True)
class CameraFrame:
    """Axis-aligned pixel lattice in the XY plane.

    Pixel (col i, row j) covers ``[origin_x + i/res, origin_x + (i+1)/res)``
    times the same interval in y.  Arrays on this frame have shape
    ``(height, width)`` and row 0 is the lowest y.
    """

    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if not (np.isfinite(self.resolution) and self.resolution > 0):
            raise ValueError("resolution must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("frame needs width, height >= 1")
        if not (np.isfinite(self.origin_x) and np.isfinite(self.origin_y)):
            raise ValueError("origin must be finite")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin_x", float(self.origin_x))
        object.__setattr__(self, "origin_y", float(self.origin_y))

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def pixel_size(self):
        return 1.0 / self.resolution

    def _index(self, coord, origin):
        u = (np.asarray(coord, dtype=np.float64) - origin) * self.resolution
        near = np.round(u)
        # a point sitting on a pixel edge belongs to the upper pixel even when
        # the subtraction lands a hair below the integer
        snap = np.abs(u - near) <= 1e-9 * np.maximum(1.0, np.abs(u))
        return np.where(snap, near, np.floor(u)).astype(np.int64)

    def pixel_indices(self, points):
        """(cols, rows, inside) for an (n, >=2) array of world coordinates."""
        points = np.asarray(points, dtype=np.float64)
        cols = self._index(points[:, 0], self.origin_x)
        rows = self._index(points[:, 1], self.origin_y)
        inside = (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        return cols, rows, inside

    def pixel_centers(self):
        """World (x, y) of every pixel centre, each of shape ``(height, width)``."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) / self.resolution
        ys = self.origin_y + (np.arange(self.height) + 0.5) / self.resolution
        return np.meshgrid(xs, ys)

    def coarsened(self, factor):
        factor = int(factor)
        return CameraFrame(
            self.origin_x,
            self.origin_y,
            self.resolution / factor,
            -(-self.width // factor),
            -(-self.height // factor),
        )


@dataclass(frozen=True, eq=False)
class Raster:
    """Non-negative values on a frame with a validity mask.

    ``kind`` is ``"range"`` (max height), ``"accumulation"`` (point count) or
    ``"height"`` (any other per-pixel height, e.g. top-hat output).  Range
    values are heights above ``z_offset``, the cloud minimum at projection.
    """

    frame: CameraFrame
    values: np.ndarray
    valid: np.ndarray
    kind: str = RANGE
    z_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown raster kind {self.kind!r}")
        values = np.array(self.values, dtype=np.float64, copy=True)
        valid = np.array(self.valid, dtype=bool, copy=True)
        if values.shape != self.frame.shape or valid.shape != self.frame.shape:
            raise ValueError(f"raster arrays must have shape {self.frame.shape}")
        if not np.isfinite(values).all():
            raise ValueError("raster values must be finite")
        values[~valid] = 0.0
        if np.any(values < 0):
            raise ValueError("raster values must be non-negative")
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.frame.shape

    def absolute(self):
        """Values with ``z_offset`` added back on valid pixels (original z)."""
        return np.where(self.valid, self.values + self.z_offset, 0.0)

    def replace(self, values=None, valid=None, kind=None):
        return Raster(
            self.frame,
            self.values if values is None else values,
            self.valid if valid is None else valid,
            self.kind if kind is None else kind,
            self.z_offset,
        )


class Projection(NamedTuple):
    range: Raster
    accumulation: Raster
    dropped: int


def _xy(cloud):
    points = getattr(cloud, "points", cloud)
    return np.asarray(points, dtype=np.float64)


def fit_frame(cloud, resolution=DEFAULT_RESOLUTION):
    """Smallest lattice-aligned frame covering the XY bounding box plus a 1-px margin."""
    pts = _xy(cloud)
    if pts.shape[0] == 0:
        raise ValueError("cannot fit a frame to an empty cloud")
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    lo = np.floor(pts[:, :2].min(axis=0) * resolution)
    hi = np.ceil(pts[:, :2].max(axis=0) * resolution)
    size = np.maximum(hi - lo, 1).astype(np.int64) + 2
    return CameraFrame(
        (lo[0] - 1) / resolution,
        (lo[1] - 1) / resolution,
        resolution,
        int(size[0]),
        int(size[1]),
    )


def project(cloud, frame, z_offset=None, kernels=None):
    """Rasterize ``cloud`` into range (max height) and accumulation (count) images.

    Heights are ``z - z_offset``; by default ``z_offset`` is the cloud's
    minimum z.  Points outside ``frame`` are counted in ``dropped``.
    """
    pts = _xy(cloud)
    kernels = kernels or _kernels.ACTIVE
    if z_offset is None:
        z_offset = float(pts[:, 2].min()) if len(pts) else 0.0
    cols, rows, inside = frame.pixel_indices(pts)
    z = np.ascontiguousarray(pts[inside, 2] - z_offset)
    # heights below the offset would break non-negativity; clamp them at 0
    z = np.maximum(z, 0.0)
    rng, acc = kernels.project_points(
        np.ascontiguousarray(cols[inside]), np.ascontiguousarray(rows[inside]), z, frame.height, frame.width
    )
    valid = acc > 0
    return Projection(
        Raster(frame, rng, valid, RANGE, z_offset),
        Raster(frame, acc.astype(np.float64), valid, ACCUMULATION, 0.0),
        int((~inside).sum()),
    )


def _block_reduce(a, factor, ufunc, fill):
    h, w = a.shape
    hp, wp = -(-h // factor) * factor, -(-w // factor) * factor
    padded = np.full((hp, wp), fill, dtype=a.dtype)
    padded[:h, :w] = a
    blocks = padded.reshape(hp // factor, factor, wp // factor, factor)
    return ufunc.reduce(ufunc.reduce(blocks, axis=3), axis=1)


def downsample(raster, factor):
    """Coarsen by ``factor``: max for range/height, sum for accumulation.

    Partial blocks at the right and top edges are reduced over what they
    contain, so the coarse frame still covers the fine one.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return raster
    frame = raster.frame.coarsened(factor)
    valid = _block_reduce(raster.valid, factor, np.logical_or, False)
    if raster.kind == ACCUMULATION:
        values = _block_reduce(raster.values, factor, np.add, 0.0)
    else:
        values = _block_reduce(np.where(raster.valid, raster.values, -np.inf), factor, np.maximum, -np.inf)
    values = np.where(valid, values, 0.0)
    return Raster(frame, values, valid, raster.kind, raster.z_offset)
