"""Box-counting estimate of the upper Minkowski dimension of a point cloud."""

from __future__ import annotations

import numpy as np

DEFAULT_SCALES = tuple(2.0**-k for k in range(2, 8))


def box_counts(points: np.ndarray, scales) -> np.ndarray:
    """Number of occupied cubes of side ``eps`` (grid anchored at the origin) per scale."""
    pts = np.asarray(points, dtype=np.float64)
    counts = []
    for eps in scales:
        cells = np.floor(pts / eps).astype(np.int64)
        counts.append(np.unique(cells, axis=0).shape[0])
    return np.asarray(counts)


def minkowski_dimension(points, scales=DEFAULT_SCALES) -> float:
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 100:
        raise ValueError("need an (N, D) point array with N >= 100")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    eps = np.asarray(sorted(set(float(s) for s in scales)), dtype=np.float64)
    if eps.size < 3 or np.any(eps <= 0):
        raise ValueError("need at least 3 distinct positive scales")
    if eps[-1] / eps[0] < 4.0:
        raise ValueError("scales must span at least two octaves")
    x = np.log(1.0 / eps)
    y = np.log(box_counts(pts, eps).astype(np.float64))
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))
