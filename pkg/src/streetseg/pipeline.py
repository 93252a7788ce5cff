"""File-based pipeline stages and their composition.

Every stage reads its inputs from the output tree and writes its results
back there, so running the stages one by one is the same as a full run.

Layout of an output directory::

    config.txt             effective configuration
    blocks/line.txt        facade line and cut positions (or "none")
    blocks/profile.csv     smoothed height profile along the line
    block_NN/points.xyz    the block's points; indices.npy maps them to input order
    block_NN/*.pgm         range, accumulation, filled_range, ground_mask,
                           fth, ground_marker, components_raw, components
    block_NN/component_ids.csv  local -> global component id
    features.csv           one row per component, ids global
    selection.csv, model.txt, confusion.csv/.txt, predictions.csv  (with labels)
    cloud.labeled          every input point with its label, in input order
"""
import logging
from pathlib import Path

import numpy as np

from . import blocks, detect, ground, morpho, pgm
from .classify import FEATURE_NAMES, cross_validate, extract_all, stepwise_select, train_classifier
from .classify import io as cio
from .cloud import GROUND, CloudFormatError, LabelKind, PointCloud, artifact, back_project, read_cloud, write_cloud, write_labeled_cloud
from .detect import ArtifactMap
from .raster import ACCUMULATION, HEIGHT, downsample, fit_frame, project

log = logging.getLogger(__name__)

PER_BLOCK = ("project", "ground", "detect", "separate", "filter")
STAGES = ("blocks",) + PER_BLOCK + ("features", "classify", "label")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


class InputError(ValueError):
    pass


def _se(name):
    return morpho.StructuringElement.parse(name)


def block_dirs(out):
    dirs = sorted(Path(out).glob("block_[0-9][0-9]*"))
    if not dirs:
        raise InputError(f"no block directories in {out}; run the 'blocks' stage first")
    return dirs


# -- stages --------------------------------------------------------------------


def stage_blocks(config, out, input_path, dump=False):
    cloud = read_cloud(input_path)
    bdir = Path(out) / "blocks"
    bdir.mkdir(parents=True, exist_ok=True)
    index = np.zeros(len(cloud), dtype=np.int64)
    if config.use_blocks:
        frame = fit_frame(cloud, config.resolution)
        coarse = downsample(project(cloud, frame).range, config.block_resolution_divisor)
        line = blocks.detect_facade_line(coarse)
        profile = blocks.smooth_profile(blocks.extract_profile(coarse, line, config.band_halfwidth), config.smoothing_window)
        cuts = blocks.cut_profile(profile, config.min_depth)
        index = blocks.block_index(cloud, line, cuts)
        text = [f"theta {line.theta!r}", f"rho {line.rho!r}", f"score {line.score!r}"]
        text += [f"cut {c.position!r}" for c in cuts]
        (bdir / "line.txt").write_text("\n".join(text) + "\n")
        rows = [f"{p!r},{h!r}" for p, h in zip(profile.positions, profile.heights)]
        (bdir / "profile.csv").write_text("position,height\n" + "\n".join(rows) + "\n")
        if dump:
            pgm.save_raster(coarse, bdir / "coarse_range.pgm")
    else:
        (bdir / "line.txt").write_text("none\n")
    n_blocks = int(index.max()) + 1
    for b in range(n_blocks):
        d = Path(out) / f"block_{b:02d}"
        d.mkdir(exist_ok=True)
        sel = np.flatnonzero(index == b)
        np.save(d / "indices.npy", sel)
        write_cloud(cloud.subset(sel), d / "points.xyz")
    return n_blocks


def stage_project(config, d, dump=False):
    pts = d / "points.xyz"
    cloud = read_cloud(pts) if pts.stat().st_size else PointCloud(np.empty((0, 3)))
    if len(cloud) == 0:
        raise ValueError(f"{d.name} holds no point")
    frame = fit_frame(cloud, config.resolution)
    rng, acc, dropped = project(cloud, frame)
    pgm.save_raster(rng, d / "range.pgm")
    pgm.save_raster(acc, d / "accumulation.pgm")
    return dropped


def stage_ground(config, d, dump=False):
    rng = pgm.load_raster(d / "range.pgm")
    linked = ground.link_regions(rng, _se(config.zone_connectivity))
    filled = ground.fill_gaps(linked, _se(config.fill_connectivity))
    mask = ground.segment_ground(filled, config.lam, _se(config.zone_connectivity))
    pgm.save_raster(filled, d / "filled_range.pgm")
    pgm.save_mask(mask.mask, filled.frame, d / "ground_mask.pgm")
    if dump:
        pgm.save_raster(linked, d / "linked_range.pgm")
    return int(mask.mask.sum())


def _load_mask(d):
    filled = pgm.load_raster(d / "filled_range.pgm")
    mask, _ = pgm.load_mask(d / "ground_mask.pgm")
    return ground.GroundMask(mask & filled.valid, filled)


def _load_map(d, components_name=None):
    gm = _load_mask(d)
    heights = pgm.load_raster(d / "fth.pgm", HEIGHT)
    marker, _ = pgm.load_mask(d / "ground_marker.pgm")
    comp = None
    if components_name:
        comp, _ = pgm.load_labels(d / components_name)
        comp = comp.astype(np.int32)
    return ArtifactMap(heights, marker, gm.mask, comp)


def stage_detect(config, d, dump=False):
    gm = _load_mask(d)
    se = _se(config.fill_connectivity)
    amap = detect.detect_artifacts(gm, config.detect_threshold, se)
    pgm.save_raster(amap.heights, d / "fth.pgm")
    pgm.save_mask(amap.ground_marker, gm.filled_range.frame, d / "ground_marker.pgm")
    if dump:
        frame = gm.filled_range.frame
        inv, dom, _ = detect.inverted_image(gm)
        pgm.save_raster(gm.filled_range.replace(values=inv, valid=dom, kind=HEIGHT), d / "inverted.pgm")
        th = detect.top_hat(gm, se)
        pgm.save_raster(gm.filled_range.replace(values=th, valid=gm.mask, kind=HEIGHT), d / "tophat.pgm")
        del frame
    return int(amap.artifacts.sum())


def stage_separate(config, d, dump=False):
    amap = _load_map(d)
    amap = detect.separate_components(amap, config.area_opening_px, config.h_maxima, _se(config.fill_connectivity))
    pgm.save_labels(amap.components, amap.heights.frame, d / "components_raw.pgm")
    return amap.n_components


def stage_filter(config, d, dump=False):
    amap = _load_map(d, "components_raw.pgm")
    acc = pgm.load_raster(d / "accumulation.pgm", ACCUMULATION)
    amap = detect.filter_small(amap, acc, config.min_component_px, config.min_accumulation)
    pgm.save_labels(amap.components, amap.heights.frame, d / "components.pgm")
    pgm.save_mask(amap.ground_marker, amap.heights.frame, d / "ground_marker_filtered.pgm")
    return amap.n_components


def stage_features(config, out, dump=False):
    all_ids, rows = [], []
    next_id = 1
    for d in block_dirs(out):
        comp, frame = pgm.load_labels(d / "components.pgm")
        heights = pgm.load_raster(d / "fth.pgm", HEIGHT)
        acc = pgm.load_raster(d / "accumulation.pgm", ACCUMULATION)
        local, X = extract_all(comp, heights, acc, frame)
        glob = np.arange(next_id, next_id + len(local))
        next_id += len(local)
        lines = ["local_id,component_id"] + [f"{a},{b}" for a, b in zip(local, glob)]
        (d / "component_ids.csv").write_text("\n".join(lines) + "\n")
        all_ids.append(glob)
        rows.append(X)
    ids = np.concatenate(all_ids)
    X = np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    cio.write_features(Path(out) / "features.csv", ids, X)
    return len(ids)


def stage_classify(config, out, labels_path, dump=False):
    if labels_path is None:
        raise InputError("the classify stage needs a labels CSV")
    out = Path(out)
    ids, X, _ = cio.read_features(out / "features.csv")
    known = cio.read_labels(labels_path)
    train = np.array([int(i) in known for i in ids])
    y = np.array([known[int(i)] for i in ids[train]])
    if train.sum() == 0:
        raise ValueError("no labelled component matches features.csv")
    Xt = X[train]
    trace = stepwise_select(Xt, y, config.p_cutoff, FEATURE_NAMES)
    cio.write_trace(out / "selection.csv", trace)
    cols = [FEATURE_NAMES.index(f) for f in trace.selected] or list(range(len(FEATURE_NAMES)))
    matrix = cross_validate(Xt[:, cols], y, config.cv_folds, config.seed)
    cio.write_confusion(out / "confusion", matrix)
    model = train_classifier(Xt[:, cols], y)
    pred = model.predict(X[:, cols])
    cio.write_labels(out / "predictions.csv", {int(i): str(p) for i, p in zip(ids, pred)})
    lines = [
        "classifier: regularized linear discriminant",
        f"features: {','.join(FEATURE_NAMES[c] for c in cols)}",
        f"selected_by_wilks: {','.join(trace.selected) or '(none, all used)'}",
        f"p_cutoff: {config.p_cutoff}",
        f"cv_folds: {config.cv_folds}",
        f"seed: {config.seed}",
        f"training_samples: {int(train.sum())}",
    ]
    for c, prior in zip(model.classes_, model.priors_):
        lines.append(f"prior {c}: {prior:.6f}")
    (out / "model.txt").write_text("\n".join(lines) + "\n")
    return matrix


def stage_label(config, out, input_path, dump=False):
    out = Path(out)
    n = sum(len(np.load(d / "indices.npy")) for d in block_dirs(out))
    kinds = np.zeros(n, dtype=np.int8)
    comp_ids = np.zeros(n, dtype=np.int64)
    points = np.zeros((n, 3))
    for d in block_dirs(out):
        idx = np.load(d / "indices.npy")
        cloud = read_cloud(d / "points.xyz")
        comp, frame = pgm.load_labels(d / "components.pgm")
        marker, _ = pgm.load_mask(d / "ground_marker_filtered.pgm")
        filled = pgm.load_raster(d / "filled_range.pgm")
        pairs = (d / "component_ids.csv").read_text().split()[1:]
        lut = dict(tuple(map(int, p.split(","))) for p in pairs)
        offset = int(comp.max()) + 1
        labels = np.zeros(frame.shape, dtype=np.int64)
        labels[filled.valid] = offset + 1
        labels[marker] = offset
        labels[comp > 0] = comp[comp > 0]
        mapping = {offset: GROUND, offset + 1: ground.FACADE}
        mapping.update({loc: artifact(g) for loc, g in lut.items()})
        lab = back_project(cloud, labels, frame, mapping)
        kinds[idx] = lab.kinds
        comp_ids[idx] = lab.component_ids
        points[idx] = cloud.points
    labelled = PointCloud(points, kinds, comp_ids)
    write_labeled_cloud(labelled, out / "cloud.labeled")
    return int((kinds == LabelKind.ARTIFACT).sum())


# -- driver --------------------------------------------------------------------


def run_stage(name, config, out, input_path=None, labels_path=None, dump=False):
    """Run one stage (over every block for per-block stages)."""
    if name not in STAGES:
        raise InputError(f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    out = Path(out)
    try:
        if name == "blocks":
            if input_path is None:
                raise InputError("the blocks stage needs the input cloud")
            return stage_blocks(config, out, input_path, dump)
        if name in PER_BLOCK:
            fn = globals()[f"stage_{name}"]
            return [fn(config, d, dump) for d in block_dirs(out)]
        if name == "features":
            return stage_features(config, out, dump)
        if name == "classify":
            return stage_classify(config, out, labels_path, dump)
        return stage_label(config, out, input_path, dump)
    except (InputError, CloudFormatError):
        raise
    except Exception as exc:  # surfaced with the stage name
        raise StageError(name, exc) from exc


def run_pipeline(config, input_path, out, labels_path=None, dump_stages=()):
    """Every stage in order; returns the dict of stage results."""
    out = Path(out)
    input_path = Path(input_path)
    if not input_path.is_file():
        raise InputError(f"input cloud {input_path} does not exist")
    if labels_path is not None and not Path(labels_path).is_file():
        raise InputError(f"labels file {labels_path} does not exist")
    out.mkdir(parents=True, exist_ok=True)
    (out / "FAILED").unlink(missing_ok=True)
    (out / "config.txt").write_text(config.to_text())
    results = {}
    for name in STAGES:
        if name == "classify" and labels_path is None:
            continue
        results[name] = run_stage(name, config, out, input_path, labels_path, name in dump_stages)
        log.info("stage %s: %s", name, results[name])
    return results
