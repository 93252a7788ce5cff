import numpy as np
import pytest

from streetseg import _kernels
from streetseg.blocks import (
    BlockCut,
    FacadeLine,
    HeightProfile,
    block_index,
    cut_profile,
    detect_facade_line,
    extract_profile,
    hough_accumulator,
    smooth_profile,
    split_blocks,
)
from streetseg.cloud import PointCloud
from streetseg.raster import CameraFrame, Raster, fit_frame, project

RES = 5.0


def wall_points(length, height, theta_deg=0.0, offset=3.0, step=0.05, gap=None):
    """Vertical wall whose normal points at ``theta_deg``; ``gap`` = (a, b) along the wall."""
    t = np.deg2rad(theta_deg)
    s = np.arange(0, length, step)
    if gap is not None:
        s = s[(s < gap[0]) | (s >= gap[1])]
    z = np.arange(0, height + 1e-9, 0.25)
    S, Z = np.meshgrid(s, z)
    S, Z = S.ravel(), Z.ravel()
    normal = np.array([np.cos(t), np.sin(t)])
    along = np.array([-np.sin(t), np.cos(t)])
    xy = offset * normal + S[:, None] * along
    return np.column_stack([xy, Z])


def wall_raster(points):
    cloud = PointCloud(points)
    return project(cloud, fit_frame(cloud, RES)).range, cloud


def column_raster(h=100, w=20, col=10, value=12.0):
    frame = CameraFrame(0.0, 0.0, RES, w, h)
    values = np.zeros((h, w))
    values[:, col] = value
    return Raster(frame, values, values > 0)


# -- Hough line -----------------------------------------------------------------


def test_vertical_wall_line():
    pts = wall_points(20, 10, 0.0, offset=3.0)
    raster, _ = wall_raster(pts)
    line = detect_facade_line(raster)
    assert abs(np.rad2deg(line.theta)) <= 0.5
    cols, _, _ = raster.frame.pixel_indices(pts)
    assert abs(line.rho - (cols[0] + 0.5)) <= 1.0
    assert np.allclose(line.offset(pts), 0, atol=1.0 / RES)


def _lsq_normal_deg(raster):
    """Normal direction of the total least squares line through the wall pixels."""
    rows, cols = np.nonzero(raster.valid)
    xy = np.column_stack([cols + 0.5, rows + 0.5]).astype(float)
    xy -= xy.mean(axis=0)
    _, _, vt = np.linalg.svd(xy, full_matrices=False)
    n = vt[1]
    ang = np.rad2deg(np.arctan2(n[1], n[0])) % 180.0
    return ang


@pytest.mark.parametrize("theta", [30.0, 75.0, 120.0])
def test_rotated_wall_matches_least_squares(theta):
    raster, _ = wall_raster(wall_points(25, 10, theta, offset=4.0))
    line = detect_facade_line(raster)
    oracle = _lsq_normal_deg(raster)
    assert abs(oracle - theta) < 1.0
    diff = (np.rad2deg(line.theta) - oracle + 90) % 180 - 90
    assert abs(diff) <= 0.5


def test_ground_noise_does_not_move_line():
    pts = wall_points(20, 10, 30.0, offset=6.0)
    clean, cloud = wall_raster(pts)
    rng = np.random.default_rng(4)
    lo, hi = pts[:, :2].min(axis=0), pts[:, :2].max(axis=0)
    noise = np.column_stack([rng.uniform(lo - 3, hi + 3, (20000, 2)), rng.uniform(0, 0.05, 20000)])
    noisy = project(PointCloud(np.vstack([pts, noise])), clean.frame, z_offset=0.0).range
    a, b = detect_facade_line(clean), detect_facade_line(noisy)
    assert (a.theta, a.rho) == (b.theta, b.rho)


def test_line_invariant_to_value_scale():
    raster, _ = wall_raster(wall_points(20, 10, 50.0))
    line = detect_facade_line(raster)
    for k in (0.1, 3.0, 17.0):
        scaled = raster.replace(values=raster.values * k)
        other = detect_facade_line(scaled)
        assert (other.theta, other.rho) == (line.theta, line.rho)


def test_hough_backends_agree():
    raster, _ = wall_raster(wall_points(15, 8, 20.0))
    _, _, a = hough_accumulator(raster, kernels=_kernels.NUMPY)
    _, _, b = hough_accumulator(raster, kernels=_kernels.NUMBA)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-9)


def test_line_errors():
    frame = CameraFrame(0, 0, RES, 5, 5)
    with pytest.raises(ValueError):
        detect_facade_line(Raster(frame, np.zeros((5, 5)), np.zeros((5, 5), bool)))
    with pytest.raises(ValueError):
        FacadeLine(np.pi, 0.0, 1.0, frame)
    with pytest.raises(ValueError):
        FacadeLine(0.0, 0.0, 0.0, frame)


# -- profile ----------------------------------------------------------------------


def test_constant_wall_constant_profile():
    raster = column_raster()
    line = detect_facade_line(raster)
    prof = extract_profile(raster, line, 2.0)
    assert len(prof) == 100
    assert np.all(prof.heights == 12.0)
    assert np.allclose(np.diff(prof.positions), 1.0 / RES)


def test_gap_extent_in_profile():
    pts = wall_points(30, 12, 0.0, gap=(10.0, 15.0))
    raster, _ = wall_raster(pts)
    line = detect_facade_line(raster)
    prof = extract_profile(raster, line, 2.0)
    along = line.arc_length(pts)
    # gap bounds along the line, from the cloud itself
    a0 = along[pts[:, 1] < 10].max()
    b0 = along[pts[:, 1] >= 15].min()
    low = prof.positions[prof.heights == 0]
    inner = low[(low > along.min()) & (low < along.max())]
    step = 1.0 / RES
    assert abs(inner.min() - a0) <= 2 * step
    assert abs(inner.max() - b0) <= 2 * step
    assert np.all((inner >= a0 - step) & (inner <= b0 + step))


def test_empty_band_is_zero():
    frame = CameraFrame(0, 0, RES, 20, 30)
    empty = Raster(frame, np.zeros((30, 20)), np.zeros((30, 20), bool))
    line = FacadeLine(0.0, 10.0, 1.0, frame)
    prof = extract_profile(empty, line, 2.0)
    assert len(prof) == 30 and np.all(prof.heights == 0)


def test_profile_errors():
    raster = column_raster()
    with pytest.raises(ValueError):
        extract_profile(raster, FacadeLine(0.0, 500.0, 1.0, raster.frame))
    with pytest.raises(ValueError):
        extract_profile(raster, detect_facade_line(raster), 0.0)
    with pytest.raises(ValueError):
        HeightProfile([0, 0], [1, 1])


# -- smoothing ----------------------------------------------------------------------


def _profile(h):
    h = np.asarray(h, dtype=float)
    return HeightProfile(np.arange(h.size) / RES, h)


def test_smooth_examples():
    p = _profile([1, 5, 2, 8, 3])
    assert np.array_equal(smooth_profile(p, 1).heights, p.heights)
    spike = _profile([2, 2, 2, 9, 2, 2, 2])
    assert np.all(smooth_profile(spike, 3).heights == 2)
    with pytest.raises(ValueError):
        smooth_profile(p, 4)


def test_smooth_reduces_sup_norm():
    rng = np.random.default_rng(11)
    clean = np.concatenate([np.full(90, 18.0), np.zeros(50), np.full(90, 15.0)])
    for _ in range(10):
        noisy = clean + rng.normal(0, 0.2, clean.size)
        # a spike right at a step can be the median itself, so keep them clear of the edges
        away = np.flatnonzero(np.abs(np.subtract.outer(np.arange(clean.size), [90, 140])).min(axis=1) > 6)
        hits = rng.choice(away, 12, replace=False)
        noisy[hits] += rng.uniform(-6, 6, 12)
        before = np.abs(noisy - clean).max()
        after = np.abs(smooth_profile(_profile(noisy), 11).heights - clean).max()
        assert after < before


# -- cuts ----------------------------------------------------------------------------


def test_monotone_profile_no_cut():
    assert cut_profile(_profile(np.linspace(0, 20, 80)), 3.0) == []


def test_two_plateaus_one_cut_in_dip():
    h = np.concatenate([np.zeros(3), np.full(90, 18.0), np.zeros(50), np.full(90, 18.0), np.zeros(3)])
    prof = _profile(h)
    cuts = cut_profile(prof, 3.0)
    assert len(cuts) == 1
    dip = prof.positions[93:143]
    assert dip[0] <= cuts[0].position <= dip[-1]


def test_shallow_dip_ignored():
    h = np.concatenate([np.full(60, 18.0), np.full(20, 17.0), np.full(60, 18.0)])
    assert cut_profile(_profile(h), 3.0) == []
    assert len(cut_profile(_profile(h), 0.5)) == 1


def test_cut_count_monotone_in_depth():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h = np.repeat(rng.uniform(0, 20, 12), rng.integers(3, 10, 12))
        counts = [len(cut_profile(_profile(h), d)) for d in (0.5, 1, 2, 3, 5, 8, 13)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        cuts = [c.position for c in cut_profile(_profile(h), 0.5)]
        assert cuts == sorted(set(cuts))


# -- splitting -----------------------------------------------------------------------


def _line():
    return FacadeLine(0.0, 0.0, 1.0, CameraFrame(0.0, 0.0, RES, 10, 10))


def test_split_no_cut_is_identity():
    cloud = PointCloud(np.random.default_rng(0).uniform(0, 10, (50, 3)))
    out = split_blocks(cloud, _line(), [])
    assert len(out) == 1 and out[0] is cloud


def test_split_symmetric_scene_halves():
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 10, 2000)
    y = np.concatenate([y, 10 - y])
    pts = np.column_stack([rng.uniform(0, 2, y.size), y, rng.uniform(0, 3, y.size)])
    cloud = PointCloud(pts)
    parts = split_blocks(cloud, _line(), [BlockCut(5.0)])
    assert len(parts) == 2
    expected = int((pts[:, 1] < 5.0).sum())
    assert len(parts[0]) == expected
    assert abs(len(parts[0]) - len(parts[1])) <= 2


def test_split_partition_and_ties():
    rng = np.random.default_rng(2)
    pts = np.column_stack([rng.uniform(0, 2, 500), rng.uniform(0, 10, 500), np.zeros(500)])
    pts[:5, 1] = 4.0
    cloud = PointCloud(pts)
    cuts = [BlockCut(4.0), BlockCut(7.5)]
    parts = split_blocks(cloud, _line(), cuts)
    assert sum(len(p) for p in parts) == len(cloud)
    idx = block_index(cloud, _line(), cuts)
    assert np.all(idx[:5] == 1)
    for b, part in enumerate(parts):
        assert np.array_equal(part.points, pts[idx == b])
    with pytest.raises(ValueError):
        block_index(cloud, _line(), [BlockCut(7.5), BlockCut(4.0)])
