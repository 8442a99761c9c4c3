"""EMB1 binary container.

Layout: 4 magic bytes ``EMB1``, an unsigned 32-bit little-endian header
length, a UTF-8 JSON header, then a little-endian float32 payload. Embedding
matrices, SVD models, linear maps and conv weights all share this container
and are told apart by the header ``kind`` key (embeddings carry none).
"""
import json
import os
import struct
from pathlib import Path
from typing import Any, Tuple, Union

import numpy as np

from geoembed_common.errors import (
    BadMagicError,
    InvalidHeaderError,
    NonFiniteValuesError,
    SizeMismatchError,
    StoreIOError,
    TruncatedFileError,
)

MAGIC = b"EMB1"
PAYLOAD_DTYPE = np.dtype("<f4")
_LENGTH = struct.Struct("<I")

PathLike = Union[str, Path]


def encode_header(header: dict) -> bytes:
    # sorted keys keep files byte-identical across runs
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path: PathLike, header: dict, payload: np.ndarray) -> None:
    path = Path(path)
    header_bytes = encode_header(header)
    body = np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPE).tobytes()

    tmp_path = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp_path, "wb") as f:
            f.write(MAGIC)
            f.write(_LENGTH.pack(len(header_bytes)))
            f.write(header_bytes)
            f.write(body)
        os.replace(tmp_path, path)
    except OSError as e:
        raise StoreIOError(f"{path}: cannot write: {e.strerror or e}") from e


def read_container(path: PathLike) -> Tuple[dict, bytes]:
    """Returns the decoded header and the raw payload bytes."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise StoreIOError(f"{path}: cannot read: {e.strerror or e}") from e

    if len(raw) < len(MAGIC) or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: missing EMB1 magic bytes")

    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: file ends inside the header length field")

    (header_len,) = _LENGTH.unpack_from(raw, 4)
    header_end = 8 + header_len
    if len(raw) < header_end:
        raise TruncatedFileError(
            f"{path}: header declares {header_len} bytes but only {len(raw) - 8} remain"
        )

    try:
        header = json.loads(raw[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidHeaderError(f"{path}: header is not valid UTF-8 JSON: {e}") from e

    if not isinstance(header, dict):
        raise InvalidHeaderError(f"{path}: header must be a JSON object")

    if header.get("dtype", "f32") != "f32":
        raise InvalidHeaderError(f"{path}: unsupported dtype {header.get('dtype')!r}")

    return header, raw[header_end:]


def decode_payload(payload: bytes, expected_count: int, source: Any = "payload") -> np.ndarray:
    if len(payload) % PAYLOAD_DTYPE.itemsize:
        raise TruncatedFileError(
            f"{source}: payload of {len(payload)} bytes ends inside a float32 value"
        )

    count = len(payload) // PAYLOAD_DTYPE.itemsize
    if count != expected_count:
        raise SizeMismatchError(
            f"{source}: header declares {expected_count} values, payload holds {count}"
        )

    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float32)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValuesError(f"{source}: payload contains NaN or Inf")
    return values


def require_keys(header: dict, keys: tuple, source: Any) -> None:
    missing = [k for k in keys if k not in header]
    if missing:
        raise InvalidHeaderError(f"{source}: header is missing required keys {missing}")


def require_kind(header: dict, kind: str, source: Any) -> None:
    if header.get("kind") != kind:
        raise InvalidHeaderError(
            f"{source}: expected container kind {kind!r}, found {header.get('kind')!r}"
        )
