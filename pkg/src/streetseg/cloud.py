"""Point cloud parsing, labelled output and raster-to-point back-projection."""
import io
import warnings
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np


class CloudFormatError(ValueError):
    """Malformed point file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonFiniteCoordinate(CloudFormatError):
    pass


class EmptyCloudError(CloudFormatError):
    pass


class CloudFormat(Enum):
    XYZ = "xyz"
    PLY = "ply"
    LABELED = "labeled"


class LabelKind(IntEnum):
    UNASSIGNED = 0
    FACADE = 1
    GROUND = 2
    ARTIFACT = 3

    @property
    def title(self):
        return self.name.capitalize()

    @classmethod
    def from_title(cls, text):
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown label kind {text!r}") from None


@dataclass(frozen=True)
class SegmentLabel:
    kind: LabelKind
    component_id: int = 0

    def __post_init__(self):
        if (self.kind is LabelKind.ARTIFACT) != (self.component_id > 0):
            raise ValueError("component_id must be positive exactly for Artifact labels")


UNASSIGNED = SegmentLabel(LabelKind.UNASSIGNED)
FACADE = SegmentLabel(LabelKind.FACADE)
GROUND = SegmentLabel(LabelKind.GROUND)


def artifact(component_id):
    return SegmentLabel(LabelKind.ARTIFACT, int(component_id))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points as an (n, 3) float64 array plus optional per-point labels.

    Labels are stored column-wise: ``kinds`` (LabelKind codes) and
    ``component_ids`` (0 unless the kind is Artifact).
    """

    points: np.ndarray
    kinds: np.ndarray = None
    component_ids: np.ndarray = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise NonFiniteCoordinate("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if (self.kinds is None) != (self.component_ids is None):
            raise ValueError("kinds and component_ids come together")
        if self.kinds is not None:
            kinds = np.array(self.kinds, dtype=np.int8, copy=True)
            comp = np.array(self.component_ids, dtype=np.int64, copy=True)
            if kinds.shape != (len(pts),) or comp.shape != (len(pts),):
                raise ValueError("labels need exactly one entry per point")
            is_art = kinds == LabelKind.ARTIFACT
            if np.any(is_art != (comp > 0)) or np.any(comp < 0):
                raise ValueError("component ids must be positive exactly on Artifact points")
            kinds.setflags(write=False)
            comp.setflags(write=False)
            object.__setattr__(self, "kinds", kinds)
            object.__setattr__(self, "component_ids", comp)

    def __len__(self):
        return len(self.points)

    @property
    def has_labels(self):
        return self.kinds is not None

    def label(self, i):
        if not self.has_labels:
            raise ValueError("cloud has no labels")
        return SegmentLabel(LabelKind(int(self.kinds[i])), int(self.component_ids[i]))

    def with_labels(self, kinds, component_ids):
        return PointCloud(self.points, kinds, component_ids)

    def subset(self, index):
        if self.has_labels:
            return PointCloud(self.points[index], self.kinds[index], self.component_ids[index])
        return PointCloud(self.points[index])


# -- parsing -----------------------------------------------------------------


def _read_bytes(source):
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if isinstance(data, str):
        return data
    try:
        return data.decode("ascii")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise CloudFormatError("non-ASCII content", line) from None


def _numeric_rows(rows, ncols, what):
    """rows: list of (lineno, tokens).  Returns (n, ncols) float array."""
    for lineno, toks in rows:
        if len(toks) != ncols:
            raise CloudFormatError(f"expected {what}, got {len(toks)} fields", lineno)
    if not rows:
        return np.empty((0, ncols))
    try:
        arr = np.array([t for _, t in rows], dtype=np.float64)
    except ValueError:
        for lineno, toks in rows:
            try:
                [float(t) for t in toks]
            except ValueError:
                raise CloudFormatError(f"cannot parse number in {' '.join(toks)!r}", lineno) from None
        raise
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        raise NonFiniteCoordinate("non-finite coordinate", rows[int(np.argmax(bad))][0])
    return arr


def _fast_xyz(text):
    """loadtxt does the common case in C; the slow path finds the offending line."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            arr = np.loadtxt(io.StringIO(text), dtype=np.float64, comments="#", ndmin=2)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.shape[1] == 3 and np.isfinite(arr).all():
            return arr
    except (ValueError, UserWarning):
        pass
    return _numeric_rows(_data_lines(text), 3, "3 fields 'x y z'")


def _data_lines(text):
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            out.append((lineno, stripped.split()))
    return out


def _parse_ply(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudFormatError("missing 'ply' magic", 1)
    n_vertex = None
    props = []
    current = None
    end = None
    for lineno, line in enumerate(lines[1:], 2):
        toks = line.split()
        if not toks or toks[0] == "comment" or toks[0] == "obj_info":
            continue
        if toks[0] == "format":
            if len(toks) < 2 or toks[1] != "ascii":
                raise CloudFormatError("only ASCII PLY is supported", lineno)
        elif toks[0] == "element":
            current = toks[1] if len(toks) > 1 else None
            if current == "vertex":
                try:
                    n_vertex = int(toks[2])
                except (IndexError, ValueError):
                    raise CloudFormatError("bad vertex element count", lineno) from None
        elif toks[0] == "property":
            if current == "vertex":
                if len(toks) < 3 or toks[1] == "list":
                    raise CloudFormatError("unsupported vertex property", lineno)
                props.append(toks[-1])
        elif toks[0] == "end_header":
            end = lineno
            break
        else:
            raise CloudFormatError(f"unexpected header keyword {toks[0]!r}", lineno)
    if end is None:
        raise CloudFormatError("missing end_header")
    if n_vertex is None:
        raise CloudFormatError("no vertex element")
    try:
        cols = [props.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise CloudFormatError("vertex element lacks x/y/z properties") from None
    body = lines[end : end + n_vertex]
    if len(body) < n_vertex:
        raise CloudFormatError(f"expected {n_vertex} vertices, found {len(body)}", end + len(body))
    rows = [(end + 1 + i, ln.split()) for i, ln in enumerate(body)]
    arr = _numeric_rows(rows, len(props), f"{len(props)} vertex properties")
    return arr[:, cols]


def parse_cloud(source, format=CloudFormat.XYZ):
    """Parse an ASCII point file (path or binary stream) into a PointCloud.

    ``XYZ``: one ``x y z`` per line, ``#`` comments and blank lines skipped.
    ``PLY``: ASCII PLY; only the vertex x/y/z properties are kept.
    ``LABELED``: the output of :func:`write_labeled_cloud`, labels included.
    """
    format = CloudFormat(format)
    text = _read_bytes(source)
    if format is CloudFormat.PLY:
        pts = _parse_ply(text)
        cloud = PointCloud(pts)
    elif format is CloudFormat.XYZ:
        cloud = PointCloud(_fast_xyz(text))
    else:
        rows = _data_lines(text)
        for lineno, toks in rows:
            if len(toks) != 5:
                raise CloudFormatError(f"expected 5 fields, got {len(toks)}", lineno)
        pts = _numeric_rows([(ln, t[:3]) for ln, t in rows], 3, "3 coordinates")
        try:
            kinds = np.array([LabelKind.from_title(t[3]) for _, t in rows], dtype=np.int8)
            comp = np.array([int(t[4]) for _, t in rows], dtype=np.int64)
        except ValueError as exc:
            raise CloudFormatError(str(exc)) from None
        cloud = PointCloud(pts, kinds, comp)
    if len(cloud) == 0:
        raise EmptyCloudError("no points in input")
    return cloud


def read_cloud(path):
    """Parse a file, picking the format from its extension (.ply, .txt/.labeled, else XYZ)."""
    path = str(path)
    if path.endswith(".ply"):
        fmt = CloudFormat.PLY
    elif path.endswith(".labeled"):
        fmt = CloudFormat.LABELED
    else:
        fmt = CloudFormat.XYZ
    return parse_cloud(path, fmt)


# -- writing -----------------------------------------------------------------


def format_coords(values):
    """Shortest fixed-point form with at most 6 fractional digits ('1', '0.05', '-2.5')."""
    strs = np.char.mod("%.6f", np.asarray(values, dtype=np.float64))
    strs = np.char.rstrip(np.char.rstrip(strs, "0"), ".")
    return np.where(strs == "-0", "0", strs)


def _coord_lines(points):
    xs, ys, zs = (format_coords(points[:, k]).tolist() for k in range(3))
    return [f"{a} {b} {c}" for a, b, c in zip(xs, ys, zs)]


def _emit(lines, sink):
    payload = ("\n".join(lines) + "\n").encode("ascii") if lines else b""
    if hasattr(sink, "write"):
        sink.write(payload)
    else:
        with open(sink, "wb") as fh:
            fh.write(payload)


def write_cloud(cloud, sink):
    """Write plain XYZ-ASCII."""
    _emit(_coord_lines(cloud.points), sink)


def write_labeled_cloud(cloud, sink):
    """Write ``x y z kind componentId`` per point."""
    if not cloud.has_labels:
        raise ValueError("cloud has no labels to write")
    names = np.array([k.title for k in LabelKind])[cloud.kinds]
    lines = [
        f"{xyz} {kind} {cid}"
        for xyz, kind, cid in zip(_coord_lines(cloud.points), names.tolist(), cloud.component_ids.tolist())
    ]
    _emit(lines, sink)


# -- back-projection ---------------------------------------------------------


def back_project(cloud, labels, frame, label_map):
    """Give each point the label of the region its pixel belongs to.

    ``labels`` is a (height, width) integer image in ``frame``; ``label_map``
    maps region ids to SegmentLabel.  Points outside the frame or on unmapped
    regions become Unassigned.
    """
    labels = np.asarray(labels)
    if labels.shape != (frame.height, frame.width):
        raise ValueError(f"label image {labels.shape} does not match frame {(frame.height, frame.width)}")
    top = max([int(labels.max(initial=0))] + [int(k) for k in label_map]) + 1
    kind_lut = np.zeros(top, dtype=np.int8)
    comp_lut = np.zeros(top, dtype=np.int64)
    for region, lab in label_map.items():
        if region < 0:
            continue
        kind_lut[region] = lab.kind
        comp_lut[region] = lab.component_id
    cols, rows, inside = frame.pixel_indices(cloud.points)
    region = np.zeros(len(cloud), dtype=np.int64)
    region[inside] = labels[rows[inside], cols[inside]]
    region = np.clip(region, 0, top - 1)
    kinds = np.where(inside, kind_lut[region], LabelKind.UNASSIGNED)
    comp = np.where(inside, comp_lut[region], 0)
    return cloud.with_labels(kinds, comp)
