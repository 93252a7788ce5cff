"""Deterministic synthetic street scenes with per-point ground truth.

A scene is a straight street along x: ground on ``[0, length] x [0, width]``
with an optional grade along x, facade walls just outside ``y = 0`` and
``y = width``, and street furniture placed on the ground.  Surfaces are
sampled on a jittered grid whose cells sit on multiples of the point spacing,
so at the default 400 pts/m^2 every 20 px/m pixel receives about one point.

With occlusion on, ground points hidden from a sensor line (height
``sensor_height`` above the ground, running along x at ``sensor_y``) are
removed, tested ray by ray in each x cross-section.
"""
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .config import ConfigError, parse_text, to_bool

CLASSES = ("Ground", "Facade", "Car", "Lamppost", "Pedestrian", "Rest")
GROUND, FACADE, CAR, LAMPPOST, PEDESTRIAN, REST = range(6)
ARTIFACT_CLASSES = ("Car", "Lamppost", "Pedestrian", "Rest")

CAR_SIZE = (4.2, 1.8, 1.5)
CAR_CROWN = (0.3, 0.3)  # roof edge drop and chamfer width, m
POLE_RADIUS = 0.08
POLE_HEIGHT = 8.0
HEAD_RADIUS = 0.3
PEDESTRIAN_RADIUS = 0.25
PEDESTRIAN_HEIGHT = 1.7
# head and shoulders: a rounded head of this radius, its crown this much above
# the head rim, on shoulders this far below the apex
PEDESTRIAN_HEAD = (0.15, 0.1, 0.25)

JITTER = 0.1
NOISE = 0.002


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float
    z0: float
    z1: float

    def overlaps(self, other):
        return (
            self.x0 < other.x1 and other.x0 < self.x1
            and self.y0 < other.y1 and other.y0 < self.y1
            and self.z0 < other.z1 and other.z0 < self.z1
        )


@dataclass(frozen=True)
class Instance:
    """One primitive.  ``x, y`` is the footprint centre.

    ``size`` is (sx, sy, sz) for boxes (Rest), the bump extent and height for
    bumps; ``along`` orients cars with their long side on x or y.
    """

    kind: str
    x: float
    y: float
    size: tuple = ()
    along: str = "x"


@dataclass(frozen=True)
class SceneSpec:
    length: float = 20.0
    width: float = 10.0
    slope: float = 0.0
    facade_height: float = 18.0
    facades: str = "both"
    facade_gaps: tuple = ()
    density: float = 400.0
    seed: int = 0
    occlusion: bool = True
    sensor_height: float = 2.2
    sensor_y: float = None
    instances: tuple = field(default_factory=tuple)

    @property
    def spacing(self):
        return 1.0 / np.sqrt(self.density)

    @property
    def sensor_line_y(self):
        return self.width / 2 if self.sensor_y is None else self.sensor_y

    def ground_z(self, x):
        return self.slope * np.asarray(x, dtype=np.float64)


class SceneError(ValueError):
    pass


# -- primitive geometry ------------------------------------------------------


@dataclass(frozen=True)
class _Solid:
    """Convex part used for sampling, occlusion and overlap checks."""

    shape: str  # "box", "cylinder" or "sphere"
    cx: float
    cy: float
    params: tuple  # box: (x0, x1, y0, y1, z0, z1); cylinder: (r, z0, z1); sphere: (r, cz)
    cls: int
    instance: int
    # box: (drop, width) chamfer of the roof edge; cylinder: (head radius,
    # head rounding, shoulder drop) of the cap, or None for an open top
    crown: object = None

    def aabb(self):
        if self.shape == "box":
            return Box(*self.params)
        if self.shape == "cylinder":
            r, z0, z1 = self.params
            return Box(self.cx - r, self.cx + r, self.cy - r, self.cy + r, z0, z1)
        r, cz = self.params
        return Box(self.cx - r, self.cx + r, self.cy - r, self.cy + r, cz - r, cz + r)

    def footprint_contains(self, x, y):
        if self.shape == "box":
            x0, x1, y0, y1 = self.params[:4]
            return (x > x0) & (x < x1) & (y > y0) & (y < y1)
        r = self.params[0]
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 < r * r


def _base_z(spec, x0, x1):
    return float(min(spec.ground_z(x0), spec.ground_z(x1)))


def solids(spec):
    """Expand every instance into its parts (bumps are ground and yield none)."""
    out = []
    for idx, inst in enumerate(spec.instances, 1):
        kind = inst.kind
        if kind == "car":
            lx, ly, lz = CAR_SIZE
            if inst.along == "y":
                lx, ly = ly, lx
            zb = _base_z(spec, inst.x - lx / 2, inst.x + lx / 2)
            body = (inst.x - lx / 2, inst.x + lx / 2, inst.y - ly / 2, inst.y + ly / 2, zb, zb + lz)
            out.append(_Solid("box", inst.x, inst.y, body, CAR, idx, CAR_CROWN))
        elif kind == "lamppost":
            zb = float(spec.ground_z(inst.x))
            out.append(_Solid("cylinder", inst.x, inst.y, (POLE_RADIUS, zb, zb + POLE_HEIGHT), LAMPPOST, idx))
            out.append(_Solid("sphere", inst.x, inst.y, (HEAD_RADIUS, zb + POLE_HEIGHT), LAMPPOST, idx))
        elif kind == "pedestrian":
            zb = float(spec.ground_z(inst.x))
            out.append(_Solid("cylinder", inst.x, inst.y, (PEDESTRIAN_RADIUS, zb, zb + PEDESTRIAN_HEIGHT), PEDESTRIAN, idx, PEDESTRIAN_HEAD))
        elif kind == "rest":
            sx, sy, sz = inst.size
            zb = _base_z(spec, inst.x - sx / 2, inst.x + sx / 2)
            box = (inst.x - sx / 2, inst.x + sx / 2, inst.y - sy / 2, inst.y + sy / 2, zb, zb + sz)
            out.append(_Solid("box", inst.x, inst.y, box, REST, idx, (0.0, 0.0)))
        elif kind != "bump":
            raise SceneError(f"unknown instance kind {kind!r}")
    return out


def _bumps(spec):
    return [i for i in spec.instances if i.kind == "bump"]


def validate(spec):
    if spec.length <= 0 or spec.width <= 0 or spec.density <= 0:
        raise SceneError("length, width and density must be > 0")
    if spec.facades not in ("none", "left", "right", "both"):
        raise SceneError("facades must be none, left, right or both")
    if spec.facade_height <= 0 or spec.sensor_height <= 0:
        raise SceneError("heights must be > 0")
    for inst in spec.instances:
        if inst.kind in ("rest", "bump") and (len(inst.size) != 3 or min(inst.size) <= 0):
            raise SceneError(f"{inst.kind} needs a positive size (sx, sy, sz)")
        if inst.along not in ("x", "y"):
            raise SceneError("along must be x or y")
    parts = solids(spec)
    for p in parts:
        b = p.aabb()
        if b.x0 < 0 or b.x1 > spec.length or b.y0 < 0 or b.y1 > spec.width:
            raise SceneError(f"instance {p.instance} ({CLASSES[p.cls]}) leaves the street")
    for i, a in enumerate(parts):
        for b in parts[i + 1 :]:
            if a.instance != b.instance and a.aabb().overlaps(b.aabb()):
                raise SceneError(f"instances {a.instance} and {b.instance} overlap")
    for bump in _bumps(spec):
        sx, sy, _ = bump.size
        if bump.x - sx / 2 < 0 or bump.x + sx / 2 > spec.length or bump.y - sy / 2 < 0 or bump.y + sy / 2 > spec.width:
            raise SceneError("bump leaves the street")


# -- sampling ----------------------------------------------------------------


def _aligned(lo, hi, s):
    """Grid cell centres (k + 0.5) s inside [lo, hi]."""
    k0 = int(np.ceil(lo / s - 0.5 - 1e-9))
    k1 = int(np.floor(hi / s - 0.5 + 1e-9))
    return (np.arange(k0, k1 + 1) + 0.5) * s


def _uniform(lo, hi, s):
    n = max(int(round((hi - lo) / s)), 1)
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _jitter(rng, shape, s):
    return rng.uniform(-JITTER * s, JITTER * s, shape)


def _grid2(us, vs):
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return uu.ravel(), vv.ravel()


def _sample_box(p, s, rng):
    x0, x1, y0, y1, z0, z1 = p.params
    drop, width = p.crown
    pts = []
    xs, ys = _grid2(_aligned(x0, x1, s), _aligned(y0, y1, s))
    edge = np.minimum.reduce([xs - x0, x1 - xs, ys - y0, y1 - ys])
    ramp = np.minimum(edge / width, 1.0) if width > 0 else np.ones_like(edge)
    pts.append(np.column_stack([xs, ys, z1 - drop + drop * ramp]))
    zs = _uniform(z0, z1 - drop, s)
    for x in (x0, x1):
        a, b = _grid2(_aligned(y0, y1, s), zs)
        pts.append(np.column_stack([np.full(a.size, x), a, b]))
    for y in (y0, y1):
        a, b = _grid2(_aligned(x0, x1, s), zs)
        pts.append(np.column_stack([a, np.full(a.size, y), b]))
    pts = np.vstack(pts)
    pts[:, :2] += _jitter(rng, (len(pts), 2), s)
    return pts


def _ring(cx, cy, r, z0, z1, s, rng):
    n_ang = max(int(np.ceil(2 * np.pi * r / s)), 8)
    ang, zs = _grid2((np.arange(n_ang) + 0.5) * 2 * np.pi / n_ang, _uniform(z0, z1, s))
    ang = ang + rng.uniform(-0.5, 0.5, ang.size) * JITTER * 2 * np.pi / n_ang
    return np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang), zs])


def _sample_cylinder(p, s, rng):
    r, z0, z1 = p.params
    if p.crown is None:
        return _ring(p.cx, p.cy, r, z0, z1, s, rng)
    head, rounding, drop = p.crown
    shoulder = z1 - drop
    pts = [_ring(p.cx, p.cy, r, z0, shoulder, s, rng), _ring(p.cx, p.cy, head, shoulder, z1 - rounding, s, rng)]
    xs, ys = _grid2(_aligned(p.cx - r, p.cx + r, s), _aligned(p.cy - r, p.cy + r, s))
    d2 = (xs - p.cx) ** 2 + (ys - p.cy) ** 2
    keep = d2 <= r * r
    xs, ys, d2 = xs[keep], ys[keep], d2[keep]
    z = np.where(d2 <= head * head, z1 - rounding * d2 / (head * head), shoulder)
    cap = np.column_stack([xs, ys, z])
    cap[:, :2] += _jitter(rng, (len(cap), 2), s)
    pts.append(cap)
    return np.vstack(pts)


def _sample_sphere(p, s, rng):
    r, cz = p.params
    n = max(int(np.ceil(4 * np.pi * r * r / (s * s))), 16)
    k = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * k / n)
    azim = np.pi * (1 + 5**0.5) * k + rng.uniform(0, 2 * np.pi)
    return np.column_stack([
        p.cx + r * np.sin(polar) * np.cos(azim),
        p.cy + r * np.sin(polar) * np.sin(azim),
        cz + r * np.cos(polar),
    ])


_SAMPLERS = {"box": _sample_box, "cylinder": _sample_cylinder, "sphere": _sample_sphere}


# -- occlusion ---------------------------------------------------------------


def _segment_hits_rect(sy, sz, py, pz, y0, y1, z0, z1):
    """Liang-Barsky: does the open segment S->P cross the rectangle interior?"""
    t0 = np.zeros_like(py)
    t1 = np.full_like(py, 1.0 - 1e-9)
    for start, d, lo, hi in ((sy, py - sy, y0, y1), (sz, pz - sz, z0, z1)):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (lo - start) / d
            b = (hi - start) / d
        flat = d == 0
        inside_flat = (start > lo) & (start < hi)
        near = np.where(flat, np.where(inside_flat, -np.inf, np.inf), np.minimum(a, b))
        far = np.where(flat, np.where(inside_flat, np.inf, -np.inf), np.maximum(a, b))
        t0 = np.maximum(t0, near)
        t1 = np.minimum(t1, far)
    return t0 < t1


def _segment_hits_disk(sy, sz, py, pz, cy, cz, r):
    dy, dz = py - sy, pz - sz
    fy, fz = sy - cy, sz - cz
    a = dy * dy + dz * dz
    b = 2 * (fy * dy + fz * dz)
    c = fy * fy + fz * fz - r * r
    disc = b * b - 4 * a * c
    hit = disc > 0
    root = np.sqrt(np.where(hit, disc, 0.0))
    ta = (-b - root) / (2 * a)
    tb = (-b + root) / (2 * a)
    return hit & (ta < 1.0 - 1e-9) & (tb > 0.0)


def occluded(spec, parts, pts):
    """Boolean mask of the points in ``pts`` hidden from the sensor line."""
    hidden = np.zeros(len(pts), dtype=bool)
    x, py, pz = pts[:, 0], pts[:, 1], pts[:, 2]
    sy = np.full(len(pts), float(spec.sensor_line_y))
    sz = spec.ground_z(x) + spec.sensor_height
    for p in parts:
        b = p.aabb()
        sel = ~hidden & (x > b.x0) & (x < b.x1)
        if not sel.any():
            continue
        xs = x[sel]
        if p.shape == "box":
            hit = _segment_hits_rect(sy[sel], sz[sel], py[sel], pz[sel], b.y0, b.y1, b.z0, b.z1)
        elif p.shape == "cylinder":
            r, z0, z1 = p.params
            half = np.sqrt(np.maximum(r * r - (xs - p.cx) ** 2, 0.0))
            hit = _segment_hits_rect(sy[sel], sz[sel], py[sel], pz[sel], p.cy - half, p.cy + half, z0, z1)
        else:
            r, cz = p.params
            rr = np.sqrt(np.maximum(r * r - (xs - p.cx) ** 2, 0.0))
            hit = _segment_hits_disk(sy[sel], sz[sel], py[sel], pz[sel], p.cy, cz, rr)
        idx = np.flatnonzero(sel)
        hidden[idx[hit]] = True
    return hidden


def box_shadow(spec, box):
    """Analytic ground shadow of an axis-aligned box on flat ground.

    Returns ``(x0, x1, y_near, y_far)``: the strip on the far side of the box
    from the sensor line.  ``y_far`` is infinite when the box is at least as
    tall as the sensor.
    """
    sy, hs = spec.sensor_line_y, spec.sensor_height
    height = box.z1 - box.z0
    if box.y0 >= sy:
        near, edge = box.y0, box.y1
        far = np.inf if height >= hs else sy + (edge - sy) * hs / (hs - height)
        return box.x0, box.x1, near, far
    if box.y1 <= sy:
        near, edge = box.y1, box.y0
        far = -np.inf if height >= hs else sy + (edge - sy) * hs / (hs - height)
        return box.x0, box.x1, far, near
    raise SceneError("box straddles the sensor line")


# -- generation --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroundTruth:
    classes: np.ndarray  # index into CLASSES
    instance_ids: np.ndarray  # 0 for ground and facade

    def class_names(self):
        return np.array(CLASSES)[self.classes]


def _ground(spec, parts, rng):
    s = spec.spacing
    xs, ys = _grid2(_aligned(0, spec.length, s), _aligned(0, spec.width, s))
    xs = xs + _jitter(rng, xs.size, s)
    ys = ys + _jitter(rng, ys.size, s)
    zs = spec.ground_z(xs) + rng.normal(0, NOISE, xs.size)
    for bump in _bumps(spec):
        sx, sy, h = bump.size
        inside = (np.abs(xs - bump.x) <= sx / 2) & (np.abs(ys - bump.y) <= sy / 2)
        zs = zs + np.where(inside, h, 0.0)
    keep = np.ones(xs.size, dtype=bool)
    for p in parts:
        keep &= ~p.footprint_contains(xs, ys)
    return np.column_stack([xs, ys, zs])[keep]


def _facades(spec, rng):
    s = spec.spacing
    xs = _aligned(0, spec.length, s)
    for a, b in spec.facade_gaps:
        xs = xs[(xs < a) | (xs > b)]
    zs = _uniform(0, spec.facade_height, s)
    walls = []
    sides = {"none": (), "left": (-s / 2,), "right": (spec.width + s / 2,), "both": (-s / 2, spec.width + s / 2)}
    for y in sides[spec.facades]:
        gx, gz = _grid2(xs, zs)
        gx = gx + _jitter(rng, gx.size, s)
        walls.append(np.column_stack([gx, y + rng.normal(0, NOISE, gx.size), spec.ground_z(gx) + gz]))
    return np.vstack(walls) if walls else np.empty((0, 3))


def generate(spec):
    """Sample ``spec`` into ``(PointCloud, GroundTruth)``; byte-identical per seed."""
    validate(spec)
    rng = np.random.default_rng(spec.seed)
    parts = solids(spec)
    ground = _ground(spec, parts, rng)
    if spec.occlusion and parts:
        ground = ground[~occluded(spec, parts, ground)]
    blocks = [ground, _facades(spec, rng)]
    classes = [np.full(len(blocks[0]), GROUND), np.full(len(blocks[1]), FACADE)]
    inst = [np.zeros(len(blocks[0]), np.int64), np.zeros(len(blocks[1]), np.int64)]
    for p in parts:
        pts = _SAMPLERS[p.shape](p, spec.spacing, rng)
        blocks.append(pts)
        classes.append(np.full(len(pts), p.cls))
        inst.append(np.full(len(pts), p.instance, np.int64))
    pts = np.vstack(blocks)
    # coordinates go through the 6-decimal text form so files and memory agree
    pts = np.round(pts, 6)
    return PointCloud(pts), GroundTruth(np.concatenate(classes).astype(np.int64), np.concatenate(inst))


# -- text spec and outputs ---------------------------------------------------


_KIND_OF_STANZA = {"car": "car", "lamppost": "lamppost", "pedestrian": "pedestrian", "rest": "rest", "bump": "bump"}


def parse_spec(text):
    """Read a scene spec: top-level ``key = value`` plus instance stanzas.

    Stanzas: ``[car]`` (x, y, along), ``[lamppost]`` and ``[pedestrian]``
    (x, y), ``[rest]`` and ``[bump]`` (x, y, sx, sy, sz / height),
    ``[facade_gap]`` (start, end).
    """
    top, stanzas = parse_text(text)
    floats = ("length", "width", "slope", "facade_height", "density", "sensor_height", "sensor_y")
    kw = {}
    try:
        for key, value in top.items():
            if key in floats:
                kw[key] = float(value)
            elif key == "seed":
                kw[key] = int(value)
            elif key == "occlusion":
                kw[key] = to_bool(value)
            elif key == "facades":
                kw[key] = value.lower()
            else:
                raise ConfigError(f"unknown scene key {key!r}")
        instances, gaps = [], []
        for name, body in stanzas:
            if name == "facade_gap":
                gaps.append((float(body["start"]), float(body["end"])))
                continue
            if name not in _KIND_OF_STANZA:
                raise ConfigError(f"unknown stanza [{name}]")
            x, y = float(body.pop("x")), float(body.pop("y"))
            size = ()
            if name in ("rest", "bump"):
                size = (float(body.pop("sx")), float(body.pop("sy")), float(body.pop("height" if name == "bump" else "sz")))
            along = body.pop("along", "x").lower()
            if body:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(body)}")
            instances.append(Instance(_KIND_OF_STANZA[name], x, y, size, along))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return SceneSpec(facade_gaps=tuple(gaps), instances=tuple(instances), **kw)


def format_spec(spec):
    lines = [
        f"length = {spec.length}", f"width = {spec.width}", f"slope = {spec.slope}",
        f"facade_height = {spec.facade_height}", f"facades = {spec.facades}", f"density = {spec.density}",
        f"seed = {spec.seed}", f"occlusion = {'true' if spec.occlusion else 'false'}",
        f"sensor_height = {spec.sensor_height}",
    ]
    if spec.sensor_y is not None:
        lines.append(f"sensor_y = {spec.sensor_y}")
    for a, b in spec.facade_gaps:
        lines += ["", "[facade_gap]", f"start = {a}", f"end = {b}"]
    for inst in spec.instances:
        lines += ["", f"[{inst.kind}]", f"x = {inst.x}", f"y = {inst.y}"]
        if inst.kind == "car":
            lines.append(f"along = {inst.along}")
        elif inst.kind == "rest":
            lines += [f"sx = {inst.size[0]}", f"sy = {inst.size[1]}", f"sz = {inst.size[2]}"]
        elif inst.kind == "bump":
            lines += [f"sx = {inst.size[0]}", f"sy = {inst.size[1]}", f"height = {inst.size[2]}"]
    return "\n".join(lines) + "\n"


def write_truth(truth, path):
    names = truth.class_names().tolist()
    rows = [f"{i},{c},{k}" for i, (c, k) in enumerate(zip(names, truth.instance_ids.tolist()))]
    with open(path, "w") as fh:
        fh.write("point_index,class,instance_id\n")
        if rows:
            fh.write("\n".join(rows) + "\n")


def read_truth(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=str, ndmin=2)
    lookup = {name: i for i, name in enumerate(CLASSES)}
    classes = np.array([lookup[c] for c in data[:, 1]], dtype=np.int64)
    return GroundTruth(classes, data[:, 2].astype(np.int64))


def instance_classes(spec):
    """{instance id: class name} for the artifact instances of ``spec``."""
    names = {"car": "Car", "lamppost": "Lamppost", "pedestrian": "Pedestrian", "rest": "Rest"}
    return {i: names[inst.kind] for i, inst in enumerate(spec.instances, 1) if inst.kind in names}



def component_labels(labelled, truth):
    """{component id: majority true class} for the artifact components of a labelled cloud.

    Components whose points are mostly ground or facade are left out.
    """
    ids = np.asarray(labelled.component_ids)
    out = {}
    sel = ids > 0
    if not sel.any():
        return out
    pairs = np.column_stack([ids[sel], truth.classes[sel]])
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    for cid in np.unique(uniq[:, 0]):
        rows = uniq[:, 0] == cid
        # ties go to the lower class index
        best = uniq[rows][np.argmax(counts[rows]), 1]
        if CLASSES[best] in ARTIFACT_CLASSES:
            out[int(cid)] = CLASSES[best]
    return out
