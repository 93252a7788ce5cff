"""16-bit PGM (P2/P5) persistence for rasters, label images and masks.

Every image gets a sidecar ``<name>.hdr`` holding
``origin_x origin_y resolution width height`` so the frame survives a round
trip.  Height-like rasters are stored in centimetres shifted by one so that
0 unambiguously means "invalid"; accumulation rasters store raw counts.
"""
from pathlib import Path

import numpy as np

from .raster import ACCUMULATION, CameraFrame, Raster

MAXVAL = 65535


class PGMError(ValueError):
    pass


def write_pgm(path, image, binary=True):
    """Write a uint16 image; row 0 of the array is written last (y up)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise PGMError("PGM images are 2-D")
    if image.size and (image.min() < 0 or image.max() > MAXVAL):
        raise PGMError(f"values must lie in [0, {MAXVAL}]")
    data = np.flipud(image).astype(">u2")
    h, w = image.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii"))
            fh.write(data.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n{MAXVAL}\n".encode("ascii"))
            for row in data.astype(np.int64):
                fh.write((" ".join(map(str, row.tolist())) + "\n").encode("ascii"))


def _header_tokens(data):
    """Yield (token, end offset) for the first four header fields, skipping comments."""
    out = []
    pos = 0
    while len(out) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PGMError("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        out.append(data[start:pos].decode("ascii"))
    return out, pos + 1


def read_pgm(path):
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _header_tokens(data)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PGMError("bad PGM header") from None
    if magic == "P5":
        dtype = ">u2" if maxval > 255 else "u1"
        n = w * h * np.dtype(dtype).itemsize
        body = data[offset : offset + n]
        if len(body) != n:
            raise PGMError("truncated PGM body")
        img = np.frombuffer(body, dtype=dtype).reshape(h, w)
    elif magic == "P2":
        vals = data[offset:].split()
        if len(vals) != w * h:
            raise PGMError(f"expected {w * h} samples, found {len(vals)}")
        img = np.array(vals, dtype=np.int64).reshape(h, w)
    else:
        raise PGMError(f"unsupported PGM magic {magic!r}")
    return np.flipud(img).astype(np.int64)


def _hdr_path(path):
    path = Path(path)
    return path.with_name(path.name + ".hdr") if path.suffix != ".pgm" else path.with_suffix(".hdr")


def write_header(path, frame):
    fields = (frame.origin_x, frame.origin_y, frame.resolution, frame.width, frame.height)
    _hdr_path(path).write_text(" ".join(repr(v) for v in fields) + "\n")


def read_header(path):
    toks = _hdr_path(path).read_text().split()
    if len(toks) != 5:
        raise PGMError("sidecar header needs 'origin_x origin_y resolution width height'")
    return CameraFrame(float(toks[0]), float(toks[1]), float(toks[2]), int(toks[3]), int(toks[4]))


def encode(raster):
    if raster.kind == ACCUMULATION:
        return np.rint(raster.values).astype(np.int64)
    code = np.rint(raster.values * 100.0).astype(np.int64) + 1
    return np.where(raster.valid, code, 0)


def save_raster(raster, path, binary=True):
    """Write a raster quantized to centimetres (counts for accumulation)."""
    write_pgm(path, encode(raster), binary)
    write_header(path, raster.frame)


def load_raster(path, kind="range", z_offset=0.0):
    frame = read_header(path)
    img = read_pgm(path)
    if img.shape != frame.shape:
        raise PGMError(f"image {img.shape} does not match header frame {frame.shape}")
    if kind == ACCUMULATION:
        return Raster(frame, img.astype(np.float64), img > 0, kind, z_offset)
    valid = img > 0
    return Raster(frame, np.where(valid, (img - 1) / 100.0, 0.0), valid, kind, z_offset)


def save_labels(labels, frame, path, binary=True):
    labels = np.asarray(labels)
    if labels.shape != frame.shape:
        raise PGMError("label image does not match frame")
    write_pgm(path, labels, binary)
    write_header(path, frame)


def load_labels(path):
    frame = read_header(path)
    img = read_pgm(path)
    if img.shape != frame.shape:
        raise PGMError(f"image {img.shape} does not match header frame {frame.shape}")
    return img, frame


def save_mask(mask, frame, path):
    save_labels(np.asarray(mask, dtype=np.int64), frame, path)


def load_mask(path):
    img, frame = load_labels(path)
    return img > 0, frame
