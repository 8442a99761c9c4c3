import logging

from .container import (
    PathLike,
    decode_payload,
    read_container,
    require_keys,
    write_container,
)
from .embedding_matrix import EmbeddingMatrix
from geoembed_common.errors import InvalidHeaderError

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("n_rows", "n_cols", "dtype", "order", "model_id")
_RESERVED_KEYS = set(REQUIRED_KEYS) | {"season", "row_ids"}


def load_embeddings(path: PathLike) -> EmbeddingMatrix:
    header, payload = read_container(path)
    require_keys(header, REQUIRED_KEYS, path)

    if header.get("kind") is not None:
        raise InvalidHeaderError(
            f"{path}: holds a '{header['kind']}' container, not an embedding matrix"
        )
    if header["order"] != "row_major":
        raise InvalidHeaderError(f"{path}: unsupported order {header['order']!r}")

    n_rows, n_cols = int(header["n_rows"]), int(header["n_cols"])
    if n_rows < 0 or n_cols < 0:
        raise InvalidHeaderError(f"{path}: negative shape ({n_rows}, {n_cols})")

    values = decode_payload(payload, n_rows * n_cols, source=path)

    attrs = {k: v for k, v in header.items() if k not in _RESERVED_KEYS}
    matrix = EmbeddingMatrix(
        data=values.reshape(n_rows, n_cols),
        model_id=str(header["model_id"]),
        row_ids=header.get("row_ids"),
        season=header.get("season"),
        attrs=attrs,
    )
    logger.debug(f"Loaded {matrix!r} from {path}")
    return matrix


def save_embeddings(matrix: EmbeddingMatrix, path: PathLike) -> None:
    header = dict(matrix.attrs)
    header.update({
        "n_rows": matrix.n_rows,
        "n_cols": matrix.n_cols,
        "dtype": "f32",
        "order": "row_major",
        "model_id": matrix.model_id,
    })
    if matrix.season is not None:
        header["season"] = matrix.season
    if matrix.row_ids is not None:
        header["row_ids"] = list(matrix.row_ids)

    write_container(path, header, matrix.data)
    logger.debug(f"Saved {matrix!r} to {path}")
