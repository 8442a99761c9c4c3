from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from geoembed_common.errors import (
    DimensionMismatchError,
    NonFiniteValuesError,
    RowAlignmentError,
)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """N x D float32 embeddings with a model/slot identity.

    The array is stored read-only; derive new matrices with `with_data`.
    """
    data: np.ndarray
    model_id: str
    row_ids: Optional[Tuple[str, ...]] = None
    season: Optional[str] = None
    attrs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 2:
            raise DimensionMismatchError(
                f"Embedding data must be 2-D, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteValuesError(f"Embedding '{self.model_id}' contains NaN or Inf")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

        if self.row_ids is not None:
            row_ids = tuple(str(r) for r in self.row_ids)
            if len(row_ids) != data.shape[0]:
                raise RowAlignmentError(
                    f"Embedding '{self.model_id}' has {data.shape[0]} rows "
                    f"but {len(row_ids)} row ids",
                    code="row_count_mismatch",
                )
            if len(set(row_ids)) != len(row_ids):
                raise RowAlignmentError(
                    f"Embedding '{self.model_id}' has duplicate row ids",
                    code="row_id_mismatch",
                )
            object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    def as_float64(self) -> np.ndarray:
        return self.data.astype(np.float64)

    def with_data(
        self,
        data: np.ndarray,
        model_id: Optional[str] = None,
        attrs: Optional[Dict[str, Any]] = None,
    ) -> "EmbeddingMatrix":
        return EmbeddingMatrix(
            data=data,
            model_id=model_id if model_id is not None else self.model_id,
            row_ids=self.row_ids,
            season=self.season,
            attrs=dict(attrs) if attrs is not None else dict(self.attrs),
        )

    def column_slice(self, start: int, end: int, model_id: Optional[str] = None) -> "EmbeddingMatrix":
        if not 0 <= start < end <= self.n_cols:
            raise DimensionMismatchError(
                f"Column range [{start}:{end}) outside matrix with {self.n_cols} columns"
            )
        return EmbeddingMatrix(
            data=self.data[:, start:end],
            model_id=model_id if model_id is not None else self.model_id,
            row_ids=self.row_ids,
        )

    def equals(self, other: "EmbeddingMatrix") -> bool:
        return (
            self.model_id == other.model_id
            and self.row_ids == other.row_ids
            and self.season == other.season
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __repr__(self) -> str:
        return (
            f"EmbeddingMatrix(model_id={self.model_id!r}, "
            f"shape={self.shape}, season={self.season!r})"
        )


def check_rows_aligned(matrices: Sequence[EmbeddingMatrix]) -> None:
    if not matrices:
        return
    first = matrices[0]
    for m in matrices[1:]:
        if m.n_rows != first.n_rows:
            raise RowAlignmentError(
                f"Row count mismatch: '{first.model_id}' has {first.n_rows} rows, "
                f"'{m.model_id}' has {m.n_rows}",
                code="row_count_mismatch",
            )
        if first.row_ids is not None and m.row_ids is not None and m.row_ids != first.row_ids:
            raise RowAlignmentError(
                f"Row ids of '{m.model_id}' differ from '{first.model_id}'",
                code="row_id_mismatch",
            )


def concat_columns(
    matrices: Sequence[EmbeddingMatrix],
    model_id: Optional[str] = None,
) -> EmbeddingMatrix:
    if not matrices:
        raise DimensionMismatchError("concat_columns needs at least one matrix")

    check_rows_aligned(matrices)

    row_ids = next((m.row_ids for m in matrices if m.row_ids is not None), None)
    if len(matrices) == 1:
        only = matrices[0]
        return EmbeddingMatrix(
            data=only.data,
            model_id=model_id or only.model_id,
            row_ids=row_ids,
            season=only.season,
            attrs=dict(only.attrs),
        )

    return EmbeddingMatrix(
        data=np.concatenate([m.data for m in matrices], axis=1),
        model_id=model_id or "+".join(m.model_id for m in matrices),
        row_ids=row_ids,
    )


def l2_normalize_rows(matrix: EmbeddingMatrix, eps: float = 1e-12) -> EmbeddingMatrix:
    x = matrix.as_float64()
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # zero rows stay zero
    norms = np.where(norms > eps, norms, 1.0)
    return matrix.with_data(x / norms)


def stack_rows(matrices: List[EmbeddingMatrix], model_id: str) -> EmbeddingMatrix:
    """Row-wise stack used to fit one basis over several seasons."""
    widths = {m.n_cols for m in matrices}
    if len(widths) != 1:
        raise DimensionMismatchError(f"Cannot stack matrices with widths {sorted(widths)}")
    return EmbeddingMatrix(
        data=np.concatenate([m.data for m in matrices], axis=0),
        model_id=model_id,
    )
