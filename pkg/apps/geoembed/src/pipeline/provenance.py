"""Provenance records: what went in, what came out, with which seeds.

No timestamps, so rerunning a command rewrites the record byte for byte.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import BaseModel, Field

import geoembed_common
from geoembed_common.errors import GeoEmbedError
from utils.hashing import hash_file

logger = logging.getLogger(__name__)

PROVENANCE_SCHEMA_VERSION = 1


class ProvenanceError(GeoEmbedError):
    code = "provenance_error"


class ProvenanceRecord(BaseModel):
    schema_version: int = PROVENANCE_SCHEMA_VERSION
    command: str
    seed: Optional[int] = None
    stage_seeds: Dict[str, int] = Field(default_factory=dict)
    parameters: dict = Field(default_factory=dict)
    # absolute paths
    inputs: Dict[str, str] = Field(default_factory=dict)
    # paths relative to the record's directory
    outputs: Dict[str, str] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)


def library_versions() -> Dict[str, str]:
    return {
        "geoembed": geoembed_common.__version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "scipy": scipy.__version__,
    }


def _relative_key(path: Path, base_dir: Path) -> str:
    path = Path(path).resolve()
    try:
        return path.relative_to(base_dir.resolve()).as_posix()
    except ValueError:
        return path.as_posix()


def build_provenance(
    command: str,
    record_path: Path,
    inputs: Iterable[Path],
    outputs: Iterable[Path],
    seed: Optional[int] = None,
    stage_seeds: Optional[Dict[str, int]] = None,
    parameters: Optional[dict] = None,
) -> ProvenanceRecord:
    base_dir = Path(record_path).parent
    return ProvenanceRecord(
        command=command,
        seed=seed,
        stage_seeds=dict(stage_seeds or {}),
        parameters=parameters or {},
        inputs={Path(p).resolve().as_posix(): hash_file(p) for p in inputs},
        outputs={_relative_key(p, base_dir): hash_file(p) for p in outputs},
        versions=library_versions(),
    )


def write_provenance(record: ProvenanceRecord, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(record.model_dump(mode="json"), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"Wrote provenance for '{record.command}' to {path}")


def load_provenance(path: Path) -> ProvenanceRecord:
    path = Path(path)
    if not path.exists():
        raise ProvenanceError(f"Provenance file not found: {path}", code="missing_file")
    try:
        return ProvenanceRecord.model_validate_json(path.read_text(encoding="utf-8"))
    except pydantic.ValidationError as e:
        raise ProvenanceError(f"{path}: invalid provenance record: {e}") from e


def verify_provenance(path: Path) -> List[str]:
    """Re-hashes every named file; returns the verified paths or raises."""
    path = Path(path)
    record = load_provenance(path)
    expected = dict(record.inputs)
    expected.update({(path.parent / k).as_posix(): v for k, v in record.outputs.items()})

    missing, changed = [], []
    for file_path, digest in expected.items():
        if not Path(file_path).exists():
            missing.append(file_path)
        elif hash_file(Path(file_path)) != digest:
            changed.append(file_path)

    if missing:
        raise ProvenanceError(f"Files named in {path} are missing: {missing}", code="missing_file")
    if changed:
        raise ProvenanceError(f"Hash mismatch for {changed}", code="hash_mismatch")
    logger.info(f"Verified {len(expected)} files against {path}")
    return sorted(expected)
