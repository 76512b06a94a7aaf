"""Piecewise KNN spring-topology construction.

Every point proposes edges to its k nearest points within a search radius,
where k and the radius come from the point's cluster; proposals are unioned
and deduplicated. A final pass bridges disconnected components with the
globally shortest cross edges so no fragment floats free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import ConfigError, SpringTopology, as_points


@dataclass(frozen=True)
class ClusterKnn:
    max_neighbors: int
    radius: float

    def __post_init__(self):
        if self.max_neighbors < 1:
            raise ConfigError("max_neighbors must be at least 1")
        if self.radius <= 0:
            raise ConfigError("radius must be positive")


@dataclass(frozen=True)
class ClusterTopologyConfig:
    """Cluster labels plus per-cluster KNN hyperparameters."""

    labels: np.ndarray
    per_cluster: tuple[ClusterKnn, ...]

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        per = tuple(self.per_cluster)
        if labels.ndim != 1:
            raise ConfigError("labels must be a flat array")
        if labels.size and (labels.min() < 0 or labels.max() >= len(per)):
            raise ConfigError("label refers to a missing cluster entry")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "per_cluster", per)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    d = points[:, None, :] - points[None, :, :]
    return np.sqrt(d[:, :, 0] ** 2 + d[:, :, 1] ** 2 + d[:, :, 2] ** 2)


def neighbor_order(points: np.ndarray):
    """Distance matrix and per-row neighbor order (distance, then index)."""
    dist = pairwise_distances(points)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return dist, order


def build_piecewise_knn(points, config: ClusterTopologyConfig,
                        precomputed=None) -> SpringTopology:
    """Union of per-point edge proposals under per-cluster (k, radius).

    `precomputed` may carry (dist, order) from neighbor_order to amortize the
    sort across repeated calls on the same points.
    """
    pts = as_points(points, "points")
    n = pts.shape[0]
    if config.labels.shape[0] != n:
        raise ConfigError("one cluster label per point required")
    dist, order = precomputed if precomputed is not None else neighbor_order(pts)
    proposals = []
    for i in range(n):
        knn = config.per_cluster[config.labels[i]]
        cand = order[i, : min(knn.max_neighbors, n - 1)]
        cand = cand[dist[i, cand] <= knn.radius]
        if cand.size:
            pair = np.stack([np.minimum(i, cand), np.maximum(i, cand)], axis=1)
            proposals.append(pair)
    if not proposals:
        return SpringTopology(np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    edges = np.unique(np.concatenate(proposals), axis=0)
    return SpringTopology.from_positions(edges, pts)


def _components(n: int, edges: np.ndarray) -> np.ndarray:
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    return np.array([find(p) for p in range(n)])


def connect_components(points, topology: SpringTopology) -> SpringTopology:
    """Bridge components with the globally shortest cross edge until connected.

    Returns the input topology unchanged when it is already connected."""
    pts = as_points(points, "points")
    n = pts.shape[0]
    comp = _components(n, topology.edges)
    if np.unique(comp).size <= 1:
        return topology
    dist = pairwise_distances(pts)
    new_edges = []
    while np.unique(comp).size > 1:
        cross = comp[:, None] != comp[None, :]
        cross &= np.tri(n, k=-1, dtype=bool).T  # keep i < j only
        masked = np.where(cross, dist, np.inf)
        flat = int(np.argmin(masked))  # first minimum = smallest (i, j)
        i, j = divmod(flat, n)
        new_edges.append((i, j))
        comp[comp == comp[j]] = comp[i]
    edges = np.concatenate([topology.edges,
                            np.asarray(new_edges, dtype=np.int64)], axis=0)
    return SpringTopology.from_positions(edges, pts)
