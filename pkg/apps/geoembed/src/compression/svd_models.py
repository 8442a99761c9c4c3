from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from geoembed_common.errors import GeoEmbedError, InvalidHeaderError
from geoembed_common.store.container import (
    decode_payload,
    read_container,
    require_keys,
    require_kind,
    write_container,
)

SVD_KIND = "svd1"
# float32 storage leaves ~1e-7 error per entry
ORTHONORMAL_ATOL = 1e-4


class KOutOfRangeError(GeoEmbedError):
    code = "k_out_of_range"


class EmptyMatrixError(GeoEmbedError):
    code = "empty_matrix"


class InvalidSvdModelError(GeoEmbedError):
    code = "invalid_svd_model"


@dataclass(frozen=True, eq=False)
class SvdModel:
    """Fitted truncated-SVD factor.

    `components` is k x D with orthonormal rows, `singular_values` is sorted
    non-increasing. `mean` is set only for the centred (PCA) variant.
    """
    components: np.ndarray
    singular_values: np.ndarray
    seed: int
    mean: Optional[np.ndarray] = None
    source_model_id: Optional[str] = None

    def __post_init__(self):
        components = np.array(self.components, dtype=np.float64, copy=True)
        singular_values = np.array(self.singular_values, dtype=np.float64, copy=True).ravel()
        if components.ndim != 2 or components.shape[0] > components.shape[1]:
            raise InvalidSvdModelError(
                f"Components must be k x D with k <= D, got shape {components.shape}"
            )
        k, d = components.shape
        if singular_values.shape != (k,):
            raise InvalidSvdModelError(f"{k} components but {singular_values.size} singular values")
        if not (np.all(np.isfinite(components)) and np.all(np.isfinite(singular_values))):
            raise InvalidSvdModelError("SVD model has non-finite entries")
        if np.any(singular_values < 0) or np.any(np.diff(singular_values) > 0):
            raise InvalidSvdModelError("Singular values must be non-negative and non-increasing")
        if not np.allclose(components @ components.T, np.eye(k), atol=ORTHONORMAL_ATOL):
            raise InvalidSvdModelError("Component rows are not orthonormal")
        mean = self.mean
        if mean is not None:
            mean = np.array(mean, dtype=np.float64, copy=True).ravel()
            if mean.shape != (d,) or not np.all(np.isfinite(mean)):
                raise InvalidSvdModelError(f"Mean must be {d} finite values, got {mean.size}")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "singular_values", singular_values)
        object.__setattr__(self, "mean", mean)

    @property
    def target_dim(self) -> int:
        return int(self.components.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.components.shape[1])

    @property
    def centered(self) -> bool:
        return self.mean is not None

    def to_dict(self) -> dict:
        return {
            "kind": SVD_KIND,
            "k": self.target_dim,
            "D": self.input_dim,
            "seed": self.seed,
            "centered": self.centered,
            "source_model_id": self.source_model_id,
            "singular_values": [float(s) for s in self.singular_values],
        }


def save_svd_model(model: SvdModel, path: Path) -> None:
    header = {
        "kind": SVD_KIND,
        "dtype": "f32",
        "k": model.target_dim,
        "D": model.input_dim,
        "seed": model.seed,
        "centered": model.centered,
    }
    if model.source_model_id is not None:
        header["source_model_id"] = model.source_model_id

    parts = [model.components.ravel(), model.singular_values.ravel()]
    if model.mean is not None:
        parts.append(model.mean.ravel())
    write_container(path, header, np.concatenate(parts))


def load_svd_model(path: Path) -> SvdModel:
    header, payload = read_container(path)
    require_kind(header, SVD_KIND, path)
    require_keys(header, ("k", "D", "seed"), path)

    k, d = int(header["k"]), int(header["D"])
    centered = bool(header.get("centered", False))
    if k < 1 or d < 1 or k > d:
        raise InvalidHeaderError(f"{path}: invalid svd shape k={k}, D={d}")

    expected = k * d + k + (d if centered else 0)
    values = decode_payload(payload, expected, source=path).astype(np.float64)

    components = values[: k * d].reshape(k, d)
    singular_values = values[k * d: k * d + k]
    mean = values[k * d + k:] if centered else None

    return SvdModel(
        components=components,
        singular_values=singular_values,
        seed=int(header["seed"]),
        mean=mean,
        source_model_id=header.get("source_model_id"),
    )
