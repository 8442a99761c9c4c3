import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from geoembed_common.errors import MetadataError

logger = logging.getLogger(__name__)

METADATA_COLUMNS = [
    "sample_id",
    "lat",
    "lon",
    "forest_cover",
    "elevation",
    "nightlights",
    "population",
]


class SampleMetadata(BaseModel):
    """Per-sample geospatial attributes. Every attribute may be missing."""
    sample_id: str = Field(..., min_length=1)
    lat: Optional[float] = Field(None, ge=-90.0, le=90.0)
    lon: Optional[float] = Field(None, ge=-180.0, le=180.0)
    forest_cover: Optional[float] = None
    elevation: Optional[float] = None
    nightlights: Optional[float] = None
    population: Optional[float] = None

    @property
    def has_location(self) -> bool:
        return self.lat is not None and self.lon is not None

    @property
    def has_regression_attributes(self) -> bool:
        return all(
            v is not None
            for v in (self.forest_cover, self.elevation, self.nightlights, self.population)
        )


def load_metadata(path: Path) -> List[SampleMetadata]:
    try:
        frame = pd.read_csv(path, dtype={"sample_id": str}, keep_default_na=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MetadataError(f"{path}: unreadable metadata CSV: {e}") from e

    if list(frame.columns) != METADATA_COLUMNS:
        raise MetadataError(
            f"{path}: expected header {','.join(METADATA_COLUMNS)}, "
            f"found {','.join(map(str, frame.columns))}"
        )

    # empty cells arrive as NaN
    frame = frame.astype(object).where(frame.notna(), None)

    rows: List[SampleMetadata] = []
    for i, record in enumerate(frame.to_dict(orient="records"), start=2):
        try:
            rows.append(SampleMetadata(**record))
        except ValidationError as e:
            raise MetadataError(f"{path}: line {i}: {e}") from e

    ids = [r.sample_id for r in rows]
    if len(set(ids)) != len(ids):
        raise MetadataError(f"{path}: duplicate sample_id values")

    logger.info(f"Loaded metadata for {len(rows)} samples from {path}")
    return rows


def save_metadata(rows: List[SampleMetadata], path: Path) -> None:
    frame = pd.DataFrame([r.model_dump() for r in rows], columns=METADATA_COLUMNS)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)