import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from .embedding_io import load_embeddings
from .embedding_matrix import EmbeddingMatrix
from geoembed_common.errors import ManifestError, StoreIOError

logger = logging.getLogger(__name__)


class ManifestEntry(BaseModel):
    model_id: str = Field(..., min_length=1)
    season: Optional[str] = None
    path: Path

    @property
    def slot_key(self) -> str:
        """Seasonal entries map to `<model_id>_<season>` slots."""
        if self.season:
            return f"{self.model_id}_{self.season}"
        return self.model_id


class Manifest(BaseModel):
    entries: List[ManifestEntry]
    metadata_path: Optional[Path] = None

    @model_validator(mode="after")
    def _unique_entries(self) -> "Manifest":
        seen = set()
        for entry in self.entries:
            key = (entry.model_id, entry.season)
            if key in seen:
                raise ValueError(
                    f"Duplicate manifest entry for model '{entry.model_id}' "
                    f"season {entry.season!r}"
                )
            seen.add(key)
        return self

    def get_entry(self, slot_key: str) -> Optional[ManifestEntry]:
        for entry in self.entries:
            if entry.slot_key == slot_key:
                return entry
        return None

    def seasons_of(self, model_id: str) -> List[ManifestEntry]:
        return [e for e in self.entries if e.model_id == model_id and e.season]

    def load_matrices(self) -> Dict[str, EmbeddingMatrix]:
        matrices: Dict[str, EmbeddingMatrix] = {}
        for entry in self.entries:
            matrix = load_embeddings(entry.path)
            if entry.season and matrix.season != entry.season:
                matrix = EmbeddingMatrix(
                    data=matrix.data,
                    model_id=matrix.model_id,
                    row_ids=matrix.row_ids,
                    season=entry.season,
                    attrs=matrix.attrs,
                )
            matrices[entry.slot_key] = matrix
            logger.info(f"Loaded '{entry.slot_key}' {matrix.shape} from {entry.path}")
        return matrices

    def resolve_paths(self, base_dir: Path) -> "Manifest":
        entries = [
            entry.model_copy(update={"path": _resolve(base_dir, entry.path)})
            for entry in self.entries
        ]
        metadata_path = _resolve(base_dir, self.metadata_path) if self.metadata_path else None
        return Manifest(entries=entries, metadata_path=metadata_path)

    @classmethod
    def from_json_string(cls, json_string: str) -> "Manifest":
        try:
            return cls.model_validate(json.loads(json_string))
        except (json.JSONDecodeError, ValidationError) as e:
            raise ManifestError(f"Invalid manifest: {e}") from e

    @classmethod
    def from_file(cls, file_path: Path) -> "Manifest":
        file_path = Path(file_path)
        try:
            text = file_path.read_text(encoding="utf-8")
        except OSError as e:
            raise StoreIOError(f"{file_path}: cannot read manifest: {e.strerror or e}") from e
        manifest = cls.from_json_string(text)
        return manifest.resolve_paths(file_path.parent)

    def to_file(self, file_path: Path) -> None:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_text(self.model_dump_json(indent=2), encoding="utf-8")


def _resolve(base_dir: Path, path: Path) -> Path:
    path = Path(path)
    return path if path.is_absolute() else base_dir / path
