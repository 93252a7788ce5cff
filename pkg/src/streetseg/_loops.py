"""Point-wise hot loops (projection, Hough voting) in plain Python.

Each function is self-contained so it can be handed to ``numba.njit`` as is.
"""
import numpy as np


def project_points(cols, rows, z, height, width):
    """Max height and point count per pixel; ``cols``/``rows`` already in frame."""
    rng = np.zeros((height, width), dtype=np.float64)
    acc = np.zeros((height, width), dtype=np.int64)
    for k in range(z.shape[0]):
        r = rows[k]
        c = cols[k]
        if acc[r, c] == 0 or z[k] > rng[r, c]:
            rng[r, c] = z[k]
        acc[r, c] += 1
    return rng, acc


def hough_vote(xs, ys, weights, cos_t, sin_t, n_rho, rho_offset):
    """Weighted (theta, rho) accumulator; rho bins are round-half-up of x cos + y sin."""
    n_theta = cos_t.shape[0]
    acc = np.zeros((n_theta, n_rho), dtype=np.float64)
    for k in range(xs.shape[0]):
        x = xs[k]
        y = ys[k]
        w = weights[k]
        for t in range(n_theta):
            b = int(np.floor(x * cos_t[t] + y * sin_t[t] + 0.5)) + rho_offset
            if 0 <= b < n_rho:
                acc[t, b] += w
    return acc
