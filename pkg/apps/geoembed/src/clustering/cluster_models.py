from dataclasses import dataclass
from typing import List, Literal, Optional, get_args

import numpy as np
from pydantic import BaseModel, Field

from geoembed_common.errors import GeoEmbedError

Linkage = Literal["ward", "average", "complete", "single"]
LINKAGES = get_args(Linkage)
METRICS = ("euclidean", "cosine")


class ClusteringError(GeoEmbedError):
    code = "clustering_error"


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    inertia: Optional[float] = None
    centroids: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_clusters):
            raise ClusteringError(
                f"Labels must lie in [0, {self.n_clusters}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)


class QualityRow(BaseModel):
    target_dim: int = Field(..., ge=1)
    mse: float = Field(..., ge=0.0)
    normalized_mse: float = Field(..., ge=0.0)
    explained_variance: float
    silhouette: float = Field(..., ge=-1.0, le=1.0)
    silhouette_baseline: float = Field(..., ge=-1.0, le=1.0)
    silhouette_delta: float


class QualityReport(BaseModel):
    """Pre/post compression quality for one model, rows sorted by target_dim."""
    model_id: str
    input_dim: int
    n_rows: int
    k_clusters: int
    seed: int
    metric: str = "euclidean"
    input_variance: float
    rows: List[QualityRow]

    def row_for(self, target_dim: int) -> Optional[QualityRow]:
        for row in self.rows:
            if row.target_dim == target_dim:
                return row
        return None

    def to_json_dict(self) -> dict:
        # compact column-wise view consumed by the CLI
        return {
            "model_id": self.model_id,
            "input_dim": self.input_dim,
            "n_rows": self.n_rows,
            "k_clusters": self.k_clusters,
            "seed": self.seed,
            "metric": self.metric,
            "dims": [r.target_dim for r in self.rows],
            "mse": [r.mse for r in self.rows],
            "normalized_mse": [r.normalized_mse for r in self.rows],
            "explained_variance": [r.explained_variance for r in self.rows],
            "silhouette": [r.silhouette for r in self.rows],
            "silhouette_baseline": self.rows[0].silhouette_baseline if self.rows else None,
            "silhouette_delta": [r.silhouette_delta for r in self.rows],
        }
