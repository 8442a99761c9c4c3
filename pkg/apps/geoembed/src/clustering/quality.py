import logging
from typing import Iterable

import numpy as np

from geoembed_common.store import EmbeddingMatrix
from compression.compressor import (
    explained_variance_ratio,
    fit_truncated_svd,
    reconstruct,
    reconstruction_mse,
    transform,
)

from .cluster_models import ClusteringError, QualityReport, QualityRow
from .kmeans import kmeans
from .silhouette import silhouette_score

logger = logging.getLogger(__name__)


def input_variance(x: EmbeddingMatrix) -> float:
    """Mean per-column variance, the scale used to normalise MSE."""
    if x.n_rows == 0:
        return 0.0
    return float(np.var(x.as_float64(), axis=0).mean())


def clustered_silhouette(x: EmbeddingMatrix, k_clusters: int, seed: int, metric: str) -> float:
    assignment = kmeans(x, k_clusters, seed, metric=metric)
    if len(np.unique(assignment.labels)) < 2:
        logger.warning(f"k-means found a single cluster on '{x.model_id}'; silhouette set to 0")
        return 0.0
    return silhouette_score(x, assignment.labels, metric=metric)


def compression_quality(
    x: EmbeddingMatrix,
    target_dims: Iterable[int],
    k_clusters: int,
    seed: int,
    metric: str = "euclidean",
    center: bool = False,
) -> QualityReport:
    dims = sorted(set(int(d) for d in target_dims))
    if not dims:
        raise ClusteringError("compression_quality needs at least one target dim")
    if k_clusters < 2:
        raise ClusteringError(f"k_clusters must be >= 2 for silhouette scoring, got {k_clusters}")

    baseline = clustered_silhouette(x, k_clusters, seed, metric)
    variance = input_variance(x)

    rows = []
    for dim in dims:
        model = fit_truncated_svd(x, dim, seed, center=center)
        z = transform(model, x)
        mse = reconstruction_mse(x, reconstruct(model, z))
        silhouette = clustered_silhouette(z, k_clusters, seed, metric)
        rows.append(QualityRow(
            target_dim=dim,
            mse=mse,
            normalized_mse=mse / variance if variance > 0 else mse,
            explained_variance=explained_variance_ratio(model, x),
            silhouette=silhouette,
            silhouette_baseline=baseline,
            silhouette_delta=silhouette - baseline,
        ))
        logger.info(
            f"'{x.model_id}' @ {dim} dims: mse={mse:.4g}, "
            f"silhouette={silhouette:.4f} (baseline {baseline:.4f})"
        )

    return QualityReport(
        model_id=x.model_id,
        input_dim=x.n_cols,
        n_rows=x.n_rows,
        k_clusters=k_clusters,
        seed=seed,
        metric=metric,
        input_variance=variance,
        rows=rows,
    )
