"""K-NN segmentation of scene splats into robot links.

Each splat centroid votes among its k nearest link-surface points; ties break
toward the candidate with the smallest mean distance, then the smallest link
index. Splats whose nearest surface point is beyond the cutoff are background
(-1). Labels are a pure per-splat function, so the result is deterministic
and invariant to splat order.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..assets.gaussians import GaussianSet

DEFAULT_K = 5
DEFAULT_CUTOFF = 0.02  # meters
BACKGROUND_LABEL = -1


def segment_links_knn(
    splats: GaussianSet | np.ndarray,
    link_clouds: list[np.ndarray],
    k: int = DEFAULT_K,
    cutoff: float = DEFAULT_CUTOFF,
) -> np.ndarray:
    """Per-splat link index, or -1 for background.

    link_clouds: world-frame surface point clouds, one per link, in link
    order (empty arrays allowed for linkless geometry).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    sizes = [np.asarray(c).reshape(-1, 3).shape[0] for c in link_clouds]
    if sum(sizes) == 0:
        raise ValueError("all link clouds are empty")

    points = np.concatenate([np.asarray(c, dtype=np.float64).reshape(-1, 3) for c in link_clouds])
    owner = np.concatenate([np.full(n, i, dtype=np.int64) for i, n in enumerate(sizes)])

    queries = splats.centroids if isinstance(splats, GaussianSet) else np.asarray(splats, float)
    queries = queries.reshape(-1, 3)
    n = queries.shape[0]
    labels = np.full(n, BACKGROUND_LABEL, dtype=np.int64)
    if n == 0:
        return labels

    kk = min(k, points.shape[0])
    tree = cKDTree(points)
    dist, idx = tree.query(queries, k=kk)
    dist = np.atleast_2d(dist.reshape(n, kk))
    idx = np.atleast_2d(idx.reshape(n, kk))

    near_enough = dist[:, 0] <= cutoff
    votes = owner[idx]  # (n, kk)

    n_links = len(link_clouds)
    counts = np.zeros((n, n_links), dtype=np.int64)
    dist_sums = np.zeros((n, n_links))
    for j in range(kk):
        np.add.at(counts, (np.arange(n), votes[:, j]), 1)
        np.add.at(dist_sums, (np.arange(n), votes[:, j]), dist[:, j])

    mean_dist = np.where(counts > 0, dist_sums / np.maximum(counts, 1), np.inf)
    # Majority vote; ties -> smallest mean distance -> smallest link index
    # (lexsort is stable, so equal keys keep ascending link order).
    best = np.lexsort((mean_dist, -counts), axis=1)[:, 0]

    labels[near_enough] = best[near_enough]
    return labels
