from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from geoembed_common.errors import GeoEmbedError
from clustering.cluster_models import Linkage

# slot order of the seasonal GeoRSCLIP embeddings
SEASONS = ("spring", "summer", "fall", "winter")


class RefinerError(GeoEmbedError):
    code = "refiner_error"


class TrainingDivergedError(RefinerError):
    code = "training_diverged"


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Square D x D map shared by every season."""
    w: np.ndarray
    init_scheme: str = "identity"

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise RefinerError(f"Linear map must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise RefinerError("Linear map has non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return int(self.w.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "LinearMap":
        return cls(w=np.eye(dim), init_scheme="identity")


@dataclass(frozen=True, eq=False)
class ProbeWeights:
    """C x (S*D) bias-free linear classifier. There is no intercept."""
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise RefinerError(f"Probe weights must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise RefinerError("Probe weights have non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def n_classes(self) -> int:
        return int(self.w.shape[0])

    @property
    def width(self) -> int:
        return int(self.w.shape[1])


class RefinerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_pseudo_clusters: int = Field(..., ge=2)
    learning_rate: float = Field(1e-2, gt=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: Optional[int] = Field(None, ge=1, description="None trains full-batch")
    l2_penalty: float = Field(1e-4, ge=0.0)
    momentum: float = Field(0.0, ge=0.0, lt=1.0)
    init_scale: float = Field(1e-2, ge=0.0)
    seed: int = Field(0, ge=0)
    linkage: Linkage = "ward"
    normalize_before_clustering: bool = False
    freeze_map: bool = False
    holdout_fraction: float = Field(0.0, ge=0.0, lt=1.0)


@dataclass(frozen=True)
class RefinerState:
    map: LinearMap
    probe: ProbeWeights
    loss_trace: Tuple[float, ...]
    holdout_trace: Tuple[float, ...] = ()
    conditioning: Optional[float] = None
    config: Optional[RefinerConfig] = field(default=None, compare=False)

    @property
    def epochs_completed(self) -> int:
        return len(self.loss_trace)

    def trace_records(self) -> List[dict]:
        records = []
        for epoch, loss in enumerate(self.loss_trace, start=1):
            record = {"epoch": epoch, "loss": loss}
            if self.holdout_trace:
                record["holdout_loss"] = self.holdout_trace[epoch - 1]
            records.append(record)
        return records
