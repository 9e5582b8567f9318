"""Pure numpy implementations of the optimizer hot kernels.

Same contracts as the compiled module in ``_native.pyx``; used when the
extension is unavailable or ``DOEOPT_PURE_PYTHON=1`` is set. All functions
take objective matrices already oriented to maximization.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def nondominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of nondominated rows under maximization.

    Row i is dominated when some row j is >= in every coordinate and > in at
    least one. Exact duplicates do not dominate each other, so duplicates of
    a nondominated point all survive.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    # ge[j, i]: j >= i everywhere; gt[j, i]: j > i somewhere
    ge = np.all(pts[:, None, :] >= pts[None, :, :], axis=2)
    gt = np.any(pts[:, None, :] > pts[None, :, :], axis=2)
    dominated = np.any(ge & gt, axis=0)
    return ~dominated


def hv2d(gains: np.ndarray) -> float:
    """Area of the union of boxes [0, g] for strictly positive 2-D gains."""
    g = np.asarray(gains, dtype=np.float64)
    n = g.shape[0]
    if n == 0:
        return 0.0
    order = np.lexsort((-g[:, 1], -g[:, 0]))  # x descending, y descending for ties
    g = g[order]
    xs = g[:, 0]
    ys = g[:, 1]
    # between consecutive distinct x values the envelope height is the
    # running max of y over points already passed
    total = 0.0
    best_y = 0.0
    for k in range(n):
        x_next = xs[k + 1] if k + 1 < n else 0.0
        if ys[k] > best_y:
            best_y = ys[k]
        total += (xs[k] - x_next) * best_y
    return float(total)


def hv3d(gains: np.ndarray) -> float:
    """Volume of the union of boxes [0, g] for strictly positive 3-D gains.

    Dimension sweep: process points by descending third coordinate and
    integrate the 2-D staircase area over each slab.
    """
    g = np.asarray(gains, dtype=np.float64)
    n = g.shape[0]
    if n == 0:
        return 0.0
    order = np.lexsort((-g[:, 1], -g[:, 0], -g[:, 2]))
    g = g[order]
    total = 0.0
    for k in range(n):
        z_hi = g[k, 2]
        z_lo = g[k + 1, 2] if k + 1 < n else 0.0
        if z_hi > z_lo:
            total += (z_hi - z_lo) * hv2d(g[: k + 1, :2])
    return float(total)
