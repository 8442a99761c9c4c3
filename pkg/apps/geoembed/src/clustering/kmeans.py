import logging

import numpy as np
from scipy.spatial.distance import cdist

from geoembed_common.store import EmbeddingMatrix

from .cluster_models import METRICS, ClusterAssignment, ClusteringError

logger = logging.getLogger(__name__)


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    return a / np.where(norms > 0, norms, 1.0)


def kmeans_plus_plus(a: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = a.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(a, a[chosen], "sqeuclidean")[:, 0]

    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every remaining point coincides with a centre
            idx = next(i for i in range(n) if i not in chosen)
        chosen.append(idx)
        closest = np.minimum(closest, cdist(a, a[idx:idx + 1], "sqeuclidean")[:, 0])

    return a[chosen].copy()


def kmeans(
    x: EmbeddingMatrix,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-4,
    metric: str = "euclidean",
) -> ClusterAssignment:
    """Lloyd iterations from a k-means++ start.

    Stops once the largest centroid shift is <= tol or after max_iter rounds.
    Under the cosine metric the rows are L2-normalised first.
    """
    n = x.n_rows
    if n == 0:
        raise ClusteringError(f"Cannot cluster empty matrix '{x.model_id}'", code="empty_matrix")
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} out of range for {n} rows", code="k_out_of_range")
    if max_iter < 1 or tol < 0:
        raise ClusteringError(f"Invalid max_iter={max_iter} / tol={tol}")
    if metric not in METRICS:
        raise ClusteringError(f"Unknown metric {metric!r}")

    a = x.as_float64()
    if metric == "cosine":
        a = _unit_rows(a)

    rng = np.random.default_rng(seed)
    centroids = kmeans_plus_plus(a, k, rng)

    for iteration in range(1, max_iter + 1):
        d2 = cdist(a, centroids, "sqeuclidean")
        labels = np.argmin(d2, axis=1)
        point_cost = d2[np.arange(n), labels]

        new_centroids = centroids.copy()
        taken = set()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centroids[c] = a[members].mean(axis=0)
                continue
            # empty cluster: move it onto the worst-served point
            order = np.argsort(-point_cost, kind="stable")
            far = next(int(i) for i in order if int(i) not in taken)
            taken.add(far)
            new_centroids[c] = a[far]
            logger.warning(f"k-means cluster {c} emptied at iteration {iteration}; relocated")

        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift <= tol:
            break

    d2 = cdist(a, centroids, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())

    logger.debug(f"k-means on '{x.model_id}': k={k}, iterations={iteration}, inertia={inertia:.6g}")
    return ClusterAssignment(labels=labels, n_clusters=k, inertia=inertia, centroids=centroids)
