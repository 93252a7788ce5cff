import numpy as np
import pytest

from streetseg import scene
from streetseg.cloud import read_cloud, write_cloud
from streetseg.scene import Box, Instance, SceneError, SceneSpec, box_shadow, generate, solids


def test_ground_only_point_count():
    cloud, truth = generate(SceneSpec(length=10, width=5, facades="none", density=400, seed=3))
    assert abs(len(cloud) - 20000) <= 0.02 * 20000
    assert np.all(truth.classes == scene.GROUND)
    assert np.all(truth.instance_ids == 0)


def test_truth_partitions_points():
    spec = SceneSpec(
        length=20,
        instances=(Instance("car", 5, 3), Instance("lamppost", 12, 2), Instance("pedestrian", 15, 7), Instance("rest", 18, 7, (1, 1, 1))),
    )
    cloud, truth = generate(spec)
    assert len(truth.classes) == len(truth.instance_ids) == len(cloud)
    assert set(np.unique(truth.classes)) == set(range(6))
    for i, inst in enumerate(spec.instances, 1):
        cls = truth.classes[truth.instance_ids == i]
        assert cls.size > 0 and np.unique(cls).size == 1
        assert scene.CLASSES[cls[0]] == scene.instance_classes(spec)[i]
    assert np.all((truth.instance_ids == 0) == np.isin(truth.classes, [scene.GROUND, scene.FACADE]))


def test_parts_lie_on_their_primitives():
    spec = SceneSpec(instances=(Instance("car", 5, 3), Instance("lamppost", 12, 7)))
    cloud, truth = generate(spec)
    car = cloud.points[truth.instance_ids == 1]
    lx, ly, lz = scene.CAR_SIZE
    tol = 5 * scene.NOISE
    assert car[:, 0].min() >= 5 - lx / 2 - tol and car[:, 0].max() <= 5 + lx / 2 + tol
    assert car[:, 2].max() <= lz + tol
    pole = cloud.points[truth.instance_ids == 2]
    assert pole[:, 2].max() == pytest.approx(scene.POLE_HEIGHT + scene.HEAD_RADIUS, abs=0.02)


def test_one_car_shadow_is_empty():
    spec = SceneSpec(length=20, width=10, seed=7, instances=(Instance("car", 10, 2.5),))
    cloud, truth = generate(spec)
    (part,) = solids(spec)
    x0, x1, y_lo, y_hi = box_shadow(spec, part.aabb())
    assert y_hi == pytest.approx(3.4)  # the car side facing the sensor
    g = cloud.points[truth.classes == scene.GROUND]
    inside = (g[:, 0] > x0) & (g[:, 0] < x1) & (g[:, 1] > y_lo) & (g[:, 1] < y_hi)
    assert inside.sum() == 0
    # just outside the strip the ground is still there
    beside = (g[:, 0] > x1 + 0.1) & (g[:, 0] < x1 + 1.0) & (g[:, 1] > max(y_lo, 0)) & (g[:, 1] < y_hi)
    assert beside.sum() > 100
    # with occlusion off the strip is populated
    open_cloud, open_truth = generate(SceneSpec(length=20, width=10, seed=7, occlusion=False, instances=spec.instances))
    g2 = open_cloud.points[open_truth.classes == scene.GROUND]
    inside2 = (g2[:, 0] > x0) & (g2[:, 0] < x1) & (g2[:, 1] > max(y_lo, 0)) & (g2[:, 1] < y_hi)
    assert inside2.sum() > 100


def test_shadow_grows_with_height():
    spec = SceneSpec(length=20, width=10)
    areas, missing = [], []
    for h in (0.3, 0.6, 1.0, 1.5, 1.9, 2.1):
        box = Box(9.0, 11.0, 1.0, 2.0, 0.0, h)
        x0, x1, lo, hi = box_shadow(spec, box)
        areas.append((x1 - x0) * (hi - max(lo, 0.0)))
        cloud, truth = generate(SceneSpec(length=20, width=10, facades="none", instances=(Instance("rest", 10, 1.5, (2, 1, h)),)))
        missing.append(20000 * 10 / 10 - int((truth.classes == scene.GROUND).sum()))
    assert all(a <= b for a, b in zip(areas, areas[1:]))
    assert all(a <= b for a, b in zip(missing, missing[1:]))
    tall = box_shadow(spec, Box(9, 11, 1, 2, 0, 3.0))
    assert tall[2] == -np.inf


def test_deterministic(tmp_path):
    spec = SceneSpec(seed=11, instances=(Instance("car", 5, 3), Instance("pedestrian", 12, 6)))
    a, ta = generate(spec)
    b, tb = generate(spec)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(ta.classes, tb.classes)
    write_cloud(a, tmp_path / "a.xyz")
    write_cloud(b, tmp_path / "b.xyz")
    assert (tmp_path / "a.xyz").read_bytes() == (tmp_path / "b.xyz").read_bytes()
    # the 6-decimal coordinates survive the text format exactly
    assert np.array_equal(read_cloud(tmp_path / "a.xyz").points, a.points)
    c, _ = generate(SceneSpec(seed=12, instances=spec.instances))
    assert not np.array_equal(a.points[:100], c.points[:100])


@pytest.mark.parametrize(
    "instances",
    [
        (Instance("car", 5, 3), Instance("car", 7, 3)),
        (Instance("pedestrian", 5, 3), Instance("pedestrian", 5.3, 3)),
        (Instance("lamppost", 5, 3), Instance("rest", 5, 3, (1, 1, 1))),
    ],
)
def test_overlap_rejected(instances):
    with pytest.raises(SceneError):
        generate(SceneSpec(instances=instances))


def test_invalid_specs():
    with pytest.raises(SceneError):
        generate(SceneSpec(instances=(Instance("car", 1, 3),)))
    with pytest.raises(SceneError):
        generate(SceneSpec(instances=(Instance("rest", 5, 5),)))
    with pytest.raises(SceneError):
        generate(SceneSpec(instances=(Instance("tree", 5, 5),)))
    with pytest.raises(SceneError):
        generate(SceneSpec(density=0))


def test_touching_is_allowed():
    lx = scene.CAR_SIZE[0]
    cloud, truth = generate(SceneSpec(instances=(Instance("car", 5, 3), Instance("car", 5 + lx, 3))))
    assert set(np.unique(truth.instance_ids)) == {0, 1, 2}


def test_slope_raises_ground():
    cloud, truth = generate(SceneSpec(length=20, slope=0.05, facades="none"))
    g = cloud.points
    fit = np.polyfit(g[:, 0], g[:, 2], 1)
    assert fit[0] == pytest.approx(0.05, abs=1e-3)


def test_facade_gap():
    cloud, truth = generate(SceneSpec(length=30, facade_gaps=((10, 15),)))
    f = cloud.points[truth.classes == scene.FACADE]
    assert not np.any((f[:, 0] > 10.1) & (f[:, 0] < 14.9))
    assert np.any(f[:, 0] < 10) and np.any(f[:, 0] > 15)


def test_spec_text_round_trip(tmp_path):
    spec = SceneSpec(
        length=40,
        width=12,
        slope=0.03,
        seed=5,
        facade_gaps=((10.0, 20.0),),
        instances=(
            Instance("car", 5, 3, along="y"),
            Instance("lamppost", 14, 2),
            Instance("pedestrian", 16, 9),
            Instance("rest", 25, 9, (1.0, 2.0, 0.8)),
            Instance("bump", 30, 6, (1.0, 1.0, 0.04)),
        ),
    )
    assert scene.parse_spec(scene.format_spec(spec)) == spec
    _, truth = generate(SceneSpec(length=10, width=5, instances=(Instance("car", 5, 2.5),)))
    scene.write_truth(truth, tmp_path / "t.csv")
    back = scene.read_truth(tmp_path / "t.csv")
    assert np.array_equal(back.classes, truth.classes)
    assert np.array_equal(back.instance_ids, truth.instance_ids)
    assert (tmp_path / "t.csv").read_text().startswith("point_index,class,instance_id\n0,Ground,0\n")


def test_parse_spec_errors():
    with pytest.raises(ValueError):
        scene.parse_spec("length = 10\n[car]\nx = 5\n")
    with pytest.raises(ValueError):
        scene.parse_spec("bogus = 1\n")
