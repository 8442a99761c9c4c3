import logging
from typing import Mapping

import numpy as np

from geoembed_common.errors import DimensionMismatchError, GeoEmbedError
from geoembed_common.store import EmbeddingMatrix, check_rows_aligned, l2_normalize_rows

from .layout import EnsembleLayout, LayoutError

logger = logging.getLogger(__name__)

ENSEMBLE_MODEL_ID = "ensemble"


class MissingSlotError(GeoEmbedError):
    code = "missing_slot"


def compose(
    layout: EnsembleLayout,
    compressed: Mapping[str, EmbeddingMatrix],
    normalize_slots: bool = False,
    model_id: str = ENSEMBLE_MODEL_ID,
) -> EmbeddingMatrix:
    """Writes each slot's matrix into its column range of one N x total_dim matrix."""
    missing = [s for s in layout.slots if s.model_id not in compressed]
    if missing:
        raise MissingSlotError(
            f"No embeddings for slots {[str(s) for s in missing]}",
            code=f"missing_slot:{missing[0].model_id}",
        )
    for slot in layout.slots:
        width = compressed[slot.model_id].n_cols
        if width != slot.width:
            raise DimensionMismatchError(
                f"Slot {slot} is {slot.width} wide, '{slot.model_id}' has {width} columns",
                code="slot_width_mismatch",
            )

    parts = [compressed[s.model_id] for s in layout.slots]
    check_rows_aligned(parts)
    if normalize_slots:
        parts = [l2_normalize_rows(p) for p in parts]

    n_rows = parts[0].n_rows
    out = np.empty((n_rows, layout.total_dim), dtype=np.float32)
    for slot, part in zip(layout.slots, parts):
        out[:, slot.start:slot.end] = part.data

    row_ids = next((p.row_ids for p in parts if p.row_ids is not None), None)
    logger.info(f"Composed {len(parts)} slots into {n_rows} x {layout.total_dim}")
    return EmbeddingMatrix(
        data=out,
        model_id=model_id,
        row_ids=row_ids,
        attrs={"layout": layout.to_dict()["slots"], "normalize_slots": normalize_slots},
    )


def slice_slot(matrix: EmbeddingMatrix, layout: EnsembleLayout, model_id: str) -> EmbeddingMatrix:
    slot = layout.get_slot(model_id)
    if slot is None:
        raise LayoutError(f"Layout has no slot '{model_id}'")
    if matrix.n_cols != layout.total_dim:
        raise DimensionMismatchError(
            f"Matrix has {matrix.n_cols} columns, layout is {layout.total_dim} wide"
        )
    return matrix.column_slice(slot.start, slot.end, model_id=model_id)
