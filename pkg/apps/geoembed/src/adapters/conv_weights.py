import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Tuple

import numpy as np

from geoembed_common.errors import GeoEmbedError, InvalidHeaderError
from geoembed_common.store.container import (
    decode_payload,
    read_container,
    require_keys,
    require_kind,
    write_container,
)

logger = logging.getLogger(__name__)

CONV_KIND = "cw4d"
ScalePolicy = Literal["none", "preserve_sum"]


class AdapterError(GeoEmbedError):
    code = "adapter_error"


@dataclass(frozen=True, eq=False)
class ConvWeight:
    """First-layer convolution weights in (out, in, kh, kw) order."""
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 4:
            raise AdapterError(f"Conv weight must be 4-D (out, in, kh, kw), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise AdapterError("Conv weight has non-finite entries")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def out_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return int(self.data.shape[2]), int(self.data.shape[3])


def replication_counts(in_channels: int, target_in: int) -> np.ndarray:
    """How many output channels each source channel feeds under cyclic tiling."""
    return np.bincount(np.arange(target_in) % in_channels, minlength=in_channels)


def preserve_sum_mismatch(in_channels: int, target_in: int) -> float:
    """max over source channels of |1 - scale * replication count|.

    Zero when target_in is a multiple of in_channels.
    """
    scale = in_channels / target_in
    return float(np.max(np.abs(1.0 - scale * replication_counts(in_channels, target_in))))


def expand_first_layer_channels(
    w: ConvWeight,
    target_in: int,
    scale_policy: ScalePolicy = "none",
) -> ConvWeight:
    """Tiles input channels cyclically: output channel c copies source c mod in.

    For 3 -> 128 channels 126 and 127 map to sources 0 and 1.
    """
    if target_in < w.in_channels:
        raise AdapterError(
            f"target_in={target_in} is smaller than the {w.in_channels} source channels",
            code="target_channels_too_small",
        )
    if scale_policy not in ("none", "preserve_sum"):
        raise AdapterError(f"Unknown scale policy {scale_policy!r}")

    source = np.arange(target_in) % w.in_channels
    expanded = w.data[:, source, :, :].astype(np.float64)

    if scale_policy == "preserve_sum":
        expanded *= w.in_channels / target_in
        mismatch = preserve_sum_mismatch(w.in_channels, target_in)
        if mismatch > 0:
            logger.warning(
                f"{target_in} is not a multiple of {w.in_channels}; "
                f"per-channel pre-activation mismatch up to {mismatch:.4f}"
            )

    logger.info(f"Expanded conv weight {w.data.shape} -> {expanded.shape} ({scale_policy})")
    return ConvWeight(data=expanded)


def save_conv_weight(w: ConvWeight, path: Path) -> None:
    header = {"kind": CONV_KIND, "dtype": "f32", "dims": list(w.data.shape)}
    write_container(path, header, w.data)


def load_conv_weight(path: Path) -> ConvWeight:
    header, payload = read_container(path)
    require_kind(header, CONV_KIND, path)
    require_keys(header, ("dims",), path)
    dims = [int(d) for d in header["dims"]]
    if len(dims) != 4 or any(d < 0 for d in dims):
        raise InvalidHeaderError(f"{path}: cw4d dims must be four non-negative ints, got {dims}")
    values = decode_payload(payload, int(np.prod(dims)), source=path)
    return ConvWeight(data=values.reshape(dims))
