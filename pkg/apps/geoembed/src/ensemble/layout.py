import json
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator

from geoembed_common.errors import GeoEmbedError


class LayoutError(GeoEmbedError):
    code = "invalid_layout"


class Slot(BaseModel):
    model_id: str = Field(..., min_length=1)
    start: int = Field(..., ge=0)
    end: int = Field(..., gt=0)
    source_dim: Optional[int] = Field(None, ge=1, description="Native encoder width")

    @model_validator(mode="after")
    def _non_empty(self) -> "Slot":
        if self.end <= self.start:
            raise ValueError(f"Slot '{self.model_id}' has end {self.end} <= start {self.start}")
        return self

    @property
    def width(self) -> int:
        return self.end - self.start

    def __str__(self) -> str:
        return f"[{self.start}:{self.end}] {self.model_id}"


class EnsembleLayout(BaseModel):
    slots: List[Slot]

    @model_validator(mode="after")
    def _contiguous(self) -> "EnsembleLayout":
        if not self.slots:
            raise ValueError("Layout needs at least one slot")
        expected_start = 0
        seen = set()
        for slot in self.slots:
            if slot.start != expected_start:
                raise ValueError(
                    f"Slot '{slot.model_id}' starts at {slot.start}, expected {expected_start}"
                )
            if slot.model_id in seen:
                raise ValueError(f"Duplicate slot '{slot.model_id}'")
            seen.add(slot.model_id)
            expected_start = slot.end
        return self

    @property
    def total_dim(self) -> int:
        return self.slots[-1].end

    @property
    def model_ids(self) -> List[str]:
        return [s.model_id for s in self.slots]

    @property
    def boundaries(self) -> List[int]:
        return [0] + [s.end for s in self.slots]

    def get_slot(self, model_id: str) -> Optional[Slot]:
        for slot in self.slots:
            if slot.model_id == model_id:
                return slot
        return None

    def widths(self) -> Dict[str, int]:
        return {s.model_id: s.width for s in self.slots}

    def to_dict(self) -> dict:
        return {
            "slots": [s.model_dump() for s in self.slots],
            "total_dim": self.total_dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleLayout":
        try:
            return cls.model_validate({"slots": data.get("slots", [])})
        except ValidationError as e:
            raise LayoutError(f"Invalid layout: {e}") from e

    @classmethod
    def from_file(cls, file_path: Path) -> "EnsembleLayout":
        with open(file_path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_file(self, file_path: Path) -> None:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        Path(file_path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


# default seven-slot composition: (slot, width, native width)
DEFAULT_SLOTS: Tuple[Tuple[str, int, Optional[int]], ...] = (
    ("convnext_xxl", 128, 1024),
    ("vit_huge_clip", 256, 1024),
    ("vit_base_dino", 128, 768),
    ("georsclip_spring", 128, None),
    ("georsclip_summer", 128, None),
    ("georsclip_fall", 128, None),
    ("georsclip_winter", 128, None),
)


def layout_from_widths(
    widths: Sequence[Tuple[str, int]],
    source_dims: Optional[Mapping[str, Optional[int]]] = None,
) -> EnsembleLayout:
    source_dims = source_dims or {}
    slots = []
    start = 0
    for model_id, width in widths:
        if width < 1:
            raise LayoutError(f"Slot '{model_id}' width must be positive, got {width}")
        slots.append(Slot(
            model_id=model_id,
            start=start,
            end=start + width,
            source_dim=source_dims.get(model_id),
        ))
        start += width
    try:
        return EnsembleLayout(slots=slots)
    except ValidationError as e:
        raise LayoutError(f"Invalid layout: {e}") from e


def default_layout() -> EnsembleLayout:
    return layout_from_widths(
        [(model_id, width) for model_id, width, _ in DEFAULT_SLOTS],
        {model_id: source for model_id, _, source in DEFAULT_SLOTS},
    )


def with_widths(layout: EnsembleLayout, widths: Mapping[str, int]) -> EnsembleLayout:
    """Same slot order, selected widths replaced, ranges recomputed."""
    unknown = set(widths) - set(layout.model_ids)
    if unknown:
        raise LayoutError(f"Widths given for slots not in layout: {sorted(unknown)}")
    return layout_from_widths(
        [(s.model_id, widths.get(s.model_id, s.width)) for s in layout.slots],
        {s.model_id: s.source_dim for s in layout.slots},
    )


def resolve_layout(source) -> EnsembleLayout:
    """Accepts "default", a layout dict, or a path to a layout JSON file."""
    if source is None or source == "default":
        return default_layout()
    if isinstance(source, EnsembleLayout):
        return source
    if isinstance(source, dict):
        return EnsembleLayout.from_dict(source)
    return EnsembleLayout.from_file(Path(source))
