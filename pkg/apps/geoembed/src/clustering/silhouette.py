import numpy as np
from scipy.spatial.distance import pdist, squareform

from geoembed_common.store import EmbeddingMatrix

from .cluster_models import METRICS, ClusteringError


def pairwise_distances(a: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    if metric not in METRICS:
        raise ClusteringError(f"Unknown metric {metric!r}")
    if a.shape[0] < 2:
        return np.zeros((a.shape[0], a.shape[0]))
    # cosine distance is undefined for zero rows; treat them as distance 0
    return np.nan_to_num(squareform(pdist(a, metric)), nan=0.0)


def silhouette_samples(x: EmbeddingMatrix, labels, metric: str = "euclidean") -> np.ndarray:
    labels = np.asarray(labels)
    n = x.n_rows
    if labels.shape != (n,):
        raise ClusteringError(f"Expected {n} labels, got shape {labels.shape}")

    clusters, codes = np.unique(labels, return_inverse=True)
    n_clusters = len(clusters)
    if n_clusters < 2:
        raise ClusteringError("Silhouette needs at least 2 clusters", code="single_cluster")
    if n < 3 or n < n_clusters:
        raise ClusteringError(
            f"Silhouette needs at least 3 points and one per cluster, got {n} points",
            code="too_few_points",
        )

    dist = pairwise_distances(x.as_float64(), metric)
    onehot = np.zeros((n, n_clusters))
    onehot[np.arange(n), codes] = 1.0
    sizes = onehot.sum(axis=0)

    sums = dist @ onehot
    own_size = sizes[codes]
    own_sum = sums[np.arange(n), codes]

    a = np.where(own_size > 1, own_sum / np.maximum(own_size - 1, 1), 0.0)

    means = sums / sizes
    means[np.arange(n), codes] = np.inf
    b = means.min(axis=1)

    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    # singletons contribute 0
    return np.where(own_size > 1, s, 0.0)


def silhouette_score(x: EmbeddingMatrix, labels, metric: str = "euclidean") -> float:
    return float(np.mean(silhouette_samples(x, labels, metric)))
