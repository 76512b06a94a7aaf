"""Bottom-up agglomerative clustering with Ward linkage.

Merge cost between clusters A, B is the within-cluster variance increase
|A||B|/(|A|+|B|) * ||mu_A - mu_B||^2, recomputed from cluster centroids each
round. Ties pick the lexicographically smallest pair of cluster
representatives (a cluster is represented by its smallest member index), so
the result is deterministic even on symmetric point sets. O(n^3) overall,
intended for the few hundred points a scene carries.
"""

from __future__ import annotations

import numpy as np

from .types import ConfigError, as_points


def cluster_points(points, n_clusters: int) -> np.ndarray:
    """Cluster labels in [0, n_clusters), numbered by first occurrence."""
    pts = as_points(points, "points")
    n = pts.shape[0]
    if n_clusters < 1:
        raise ConfigError("n_clusters must be at least 1")
    if n_clusters > n:
        raise ConfigError("n_clusters exceeds point count")

    sizes = np.ones(n)
    centroids = pts.copy()
    reps = np.arange(n)          # smallest member index per cluster
    member_of = np.arange(n)     # point -> active cluster slot
    active = np.ones(n, dtype=bool)

    for _ in range(n - n_clusters):
        idx = np.flatnonzero(active)
        mu = centroids[idx]
        s = sizes[idx]
        d = mu[:, None, :] - mu[None, :, :]
        dist2 = d[:, :, 0] ** 2 + d[:, :, 1] ** 2 + d[:, :, 2] ** 2
        cost = (s[:, None] * s[None, :]) / (s[:, None] + s[None, :]) * dist2
        iu = np.triu_indices(len(idx), k=1)
        pair_cost = cost[iu]
        ra = reps[idx][iu[0]]
        rb = reps[idx][iu[1]]
        lo = np.minimum(ra, rb)
        hi = np.maximum(ra, rb)
        best = np.lexsort((hi, lo, pair_cost))[0]
        a = idx[iu[0][best]]
        b = idx[iu[1][best]]
        total = sizes[a] + sizes[b]
        centroids[a] = (sizes[a] * centroids[a] + sizes[b] * centroids[b]) / total
        sizes[a] = total
        reps[a] = min(reps[a], reps[b])
        active[b] = False
        member_of[member_of == b] = a

    labels = np.empty(n, dtype=np.int64)
    next_label = 0
    seen: dict[int, int] = {}
    for p in range(n):
        slot = int(member_of[p])
        if slot not in seen:
            seen[slot] = next_label
            next_label += 1
        labels[p] = seen[slot]
    return labels
