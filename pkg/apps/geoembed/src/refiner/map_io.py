import json
from pathlib import Path
from typing import Iterable

import numpy as np

from geoembed_common.errors import InvalidHeaderError
from geoembed_common.store.container import (
    decode_payload,
    read_container,
    require_keys,
    require_kind,
    write_container,
)

from .refiner_models import LinearMap, RefinerState

MAP_KIND = "map1"


def save_linear_map(linear_map: LinearMap, path: Path) -> None:
    header = {
        "kind": MAP_KIND,
        "dtype": "f32",
        "D": linear_map.dim,
        "init_scheme": linear_map.init_scheme,
    }
    write_container(path, header, linear_map.w)


def load_linear_map(path: Path) -> LinearMap:
    header, payload = read_container(path)
    require_kind(header, MAP_KIND, path)
    require_keys(header, ("D",), path)
    d = int(header["D"])
    if d < 1:
        raise InvalidHeaderError(f"{path}: invalid map dimension {d}")
    values = decode_payload(payload, d * d, source=path)
    return LinearMap(
        w=values.reshape(d, d).astype(np.float64),
        init_scheme=header.get("init_scheme", "identity"),
    )


def write_loss_trace(state: RefinerState, path: Path) -> None:
    """One JSON record per epoch."""
    write_json_lines(state.trace_records(), path)


def write_json_lines(records: Iterable[dict], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")
