"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_backends.py [--points N] [--size PX] [--repeat R]

Each kernel is run once per backend to warm up (numba compiles on first
call), then timed as the best of ``--repeat`` runs.  Results of the two
backends are compared so a speedup never hides a mismatch.
"""
import argparse
import time
from contextlib import contextmanager

import numpy as np
from scipy import ndimage

from streetseg import _kernels as point_kernels
from streetseg import blocks, morpho
from streetseg.cloud import PointCloud
from streetseg.morpho import _kernels as morpho_kernels
from streetseg.raster import downsample, fit_frame, project


@contextmanager
def backend(name):
    saved = point_kernels.ACTIVE, morpho_kernels.ACTIVE
    point_kernels.ACTIVE = getattr(point_kernels, name.upper())
    morpho_kernels.ACTIVE = getattr(morpho_kernels, name.upper())
    try:
        yield
    finally:
        point_kernels.ACTIVE, morpho_kernels.ACTIVE = saved


def best_of(fn, repeat):
    out = fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a = getattr(a, "values", a)
    b = getattr(b, "values", b)
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=0, atol=1e-9)


def cases(n_points, size, rng):
    cloud = PointCloud(rng.uniform(0, 1, (n_points, 3)) * [50, 15, 10])
    frame = fit_frame(cloud, 20)
    coarse = downsample(project(cloud, frame).range, 4)
    relief = ndimage.gaussian_filter(rng.uniform(0, 10, (size, size)), 2)
    levels = np.round(relief * 100)
    markers = morpho.regional_maxima(morpho.h_maxima(relief, 0.05))
    return {
        f"project ({n_points} pts)": lambda: tuple(x.values for x in project(cloud, frame)[:2]),
        f"hough ({coarse.shape[1]}x{coarse.shape[0]})": lambda: blocks.hough_accumulator(coarse)[2],
        f"fill ({size}^2)": lambda: morpho.fill(relief),
        f"quasi_flat_zones ({size}^2)": lambda: morpho.quasi_flat_zones(relief, 0.1),
        f"area_opening ({size}^2)": lambda: morpho.area_opening(levels, 25),
        f"watershed ({size}^2)": lambda: morpho.watershed(-relief, markers),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=1_000_000)
    ap.add_argument("--size", type=int, default=128, help="side of the square test images")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if point_kernels.NUMBA is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    table = cases(args.points, args.size, rng)
    print(f"{'kernel':<32}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  agree")
    for name, fn in table.items():
        with backend("numba"):
            t_nb, a = best_of(fn, args.repeat)
        with backend("numpy"):
            t_np, b = best_of(fn, args.repeat)
        print(f"{name:<32}{t_nb:>10.4f}{t_np:>10.4f}{t_np / max(t_nb, 1e-9):>8.1f}x  {_same(a, b)}")


if __name__ == "__main__":
    main()
