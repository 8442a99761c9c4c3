from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from geoembed_common.store import SampleMetadata

from .conv_weights import AdapterError

CaptionTemplate = Literal["latlon", "regression"]

# "Latitute"/"Longtitute" are the spellings of the captions used in training
VERBATIM_LATLON = "Latitute: {lat}, Longtitute: {lon}"
CORRECTED_LATLON = "Latitude: {lat}, Longitude: {lon}"
REGRESSION = "Forest Cover: {x1}, Elevation: {x2}, Nightlights: {x3}, Population: {x4}"


class CaptionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    verbatim_spelling: bool = True
    decimal_places: int = Field(1, ge=0, le=12)


def format_fixed(value: float, decimal_places: int) -> str:
    """Fixed-point with round-half-away-from-zero on the decimal repr."""
    quantum = Decimal(1).scaleb(-decimal_places)
    rounded = Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{rounded:f}"


def format_latlon_caption(lat: float, lon: float, cfg: Optional[CaptionConfig] = None) -> str:
    cfg = cfg or CaptionConfig()
    if lat is None or lon is None:
        raise AdapterError("Lat/lon caption needs both coordinates", code="missing_attribute")
    if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
        raise AdapterError(f"Coordinates out of range: lat={lat}, lon={lon}", code="out_of_range")

    template = VERBATIM_LATLON if cfg.verbatim_spelling else CORRECTED_LATLON
    return template.format(
        lat=format_fixed(lat, cfg.decimal_places),
        lon=format_fixed(lon, cfg.decimal_places),
    )


def format_regression_caption(
    forest_cover: float,
    elevation: float,
    nightlights: float,
    population: float,
    cfg: Optional[CaptionConfig] = None,
) -> str:
    cfg = cfg or CaptionConfig()
    values = {
        "forest_cover": forest_cover,
        "elevation": elevation,
        "nightlights": nightlights,
        "population": population,
    }
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise AdapterError(f"Regression caption is missing {missing}", code="missing_attribute")

    dp = cfg.decimal_places
    return REGRESSION.format(
        x1=format_fixed(forest_cover, dp),
        x2=format_fixed(elevation, dp),
        x3=format_fixed(nightlights, dp),
        x4=format_fixed(population, dp),
    )


def caption_for_sample(sample: SampleMetadata, template: CaptionTemplate, cfg: CaptionConfig) -> str:
    if template == "latlon":
        return format_latlon_caption(sample.lat, sample.lon, cfg)
    if template == "regression":
        return format_regression_caption(
            sample.forest_cover, sample.elevation, sample.nightlights, sample.population, cfg
        )
    raise AdapterError(f"Unknown caption template {template!r}")


def captions_for_metadata(
    rows: Iterable[SampleMetadata],
    template: CaptionTemplate,
    cfg: Optional[CaptionConfig] = None,
) -> List[str]:
    cfg = cfg or CaptionConfig()
    captions = []
    for sample in rows:
        try:
            captions.append(caption_for_sample(sample, template, cfg))
        except AdapterError as e:
            raise AdapterError(f"Sample '{sample.sample_id}': {e}", code=e.code) from e
    return captions
