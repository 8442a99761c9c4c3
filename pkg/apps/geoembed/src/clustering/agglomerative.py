import logging

import numpy as np

from geoembed_common.store import EmbeddingMatrix

from .cluster_models import LINKAGES, METRICS, ClusterAssignment, ClusteringError
from .silhouette import pairwise_distances

logger = logging.getLogger(__name__)

MAX_AGGLOMERATIVE_ROWS = 20_000


def _lance_williams(
    linkage: str,
    d_ik: np.ndarray,
    d_jk: np.ndarray,
    d_ij: float,
    n_i: int,
    n_j: int,
    n_k: np.ndarray,
) -> np.ndarray:
    if linkage == "single":
        return np.minimum(d_ik, d_jk)
    if linkage == "complete":
        return np.maximum(d_ik, d_jk)
    if linkage == "average":
        return (n_i * d_ik + n_j * d_jk) / (n_i + n_j)
    # ward, expressed on Euclidean (not squared) distances
    total = n_i + n_j + n_k
    sq = ((n_i + n_k) * d_ik ** 2 + (n_j + n_k) * d_jk ** 2 - n_k * d_ij ** 2) / total
    return np.sqrt(np.clip(sq, 0.0, None))


def _relabel_by_first_occurrence(roots: np.ndarray) -> np.ndarray:
    mapping = {}
    labels = np.empty(len(roots), dtype=np.int64)
    for i, root in enumerate(roots):
        labels[i] = mapping.setdefault(int(root), len(mapping))
    return labels


def agglomerative_cluster(
    x: EmbeddingMatrix,
    n_clusters: int,
    linkage: str = "ward",
    metric: str = "euclidean",
) -> ClusterAssignment:
    """Bottom-up merging with Lance-Williams distance updates.

    Ties go to the lexicographically smallest (i, j) pair. Final labels are
    numbered by the first sample of each cluster.
    """
    n = x.n_rows
    if linkage not in LINKAGES:
        raise ClusteringError(f"Unknown linkage {linkage!r}; expected one of {LINKAGES}")
    if metric not in METRICS:
        raise ClusteringError(f"Unknown metric {metric!r}")
    if linkage == "ward" and metric != "euclidean":
        raise ClusteringError("Ward linkage requires the euclidean metric")
    if not 1 <= n_clusters <= n:
        raise ClusteringError(
            f"n_clusters={n_clusters} out of range for {n} rows",
            code="n_clusters_out_of_range",
        )
    if n > MAX_AGGLOMERATIVE_ROWS:
        raise ClusteringError(
            f"Agglomerative clustering is capped at {MAX_AGGLOMERATIVE_ROWS} rows, got {n}",
            code="too_many_rows",
        )

    dist = pairwise_distances(x.as_float64(), metric)
    np.fill_diagonal(dist, np.inf)

    roots = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)

    for _ in range(n - n_clusters):
        # row-major argmin over the symmetric matrix picks the smallest (i, j), i < j
        i, j = divmod(int(np.argmin(dist)), n)
        d_ij = dist[i, j]

        merged = _lance_williams(linkage, dist[i], dist[j], d_ij, sizes[i], sizes[j], sizes)
        sizes[i] += sizes[j]
        active[j] = False
        roots[roots == j] = i

        merged[~active] = np.inf
        merged[i] = np.inf
        dist[i, :] = merged
        dist[:, i] = merged
        dist[j, :] = np.inf
        dist[:, j] = np.inf

    labels = _relabel_by_first_occurrence(roots)
    logger.debug(f"Agglomerative ({linkage}) on '{x.model_id}': {n} rows -> {n_clusters} clusters")
    return ClusterAssignment(labels=labels, n_clusters=n_clusters)
