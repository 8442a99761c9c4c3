import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from geoembed_common.errors import ConfigError
from clustering.cluster_models import Linkage
from refiner.refiner_models import RefinerConfig

OUTPUT_CONFIG = {
    "output_dir": os.getenv("GEOEMBED_OUTPUT_DIR", "outputs"),
}

DEFAULT_PSEUDO_CLUSTERS = 32


class CompressionSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # slot id -> candidate widths; empty means use the layout widths as given
    candidates: Dict[str, List[int]] = Field(default_factory=dict)
    total_budget: Optional[int] = Field(None, ge=1)
    k_clusters: int = Field(8, ge=2)
    mse_weight: float = Field(1.0, ge=0.0)
    metric: Literal["euclidean", "cosine"] = "euclidean"
    center: bool = False


class RefinerSettings(BaseModel):
    """RefinerConfig minus the seed, which comes from the pipeline seed."""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    model_id: str = "georsclip"
    n_pseudo_clusters: int = Field(DEFAULT_PSEUDO_CLUSTERS, ge=2)
    learning_rate: float = Field(1e-2, gt=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: Optional[int] = Field(None, ge=1)
    l2_penalty: float = Field(1e-4, ge=0.0)
    momentum: float = Field(0.0, ge=0.0, lt=1.0)
    init_scale: float = Field(1e-2, ge=0.0)
    linkage: Linkage = "ward"
    normalize_before_clustering: bool = False
    freeze_map: bool = False
    holdout_fraction: float = Field(0.0, ge=0.0, lt=1.0)

    def to_refiner_config(self, seed: int) -> RefinerConfig:
        return RefinerConfig(seed=seed, **self.model_dump(exclude={"enabled", "model_id"}))


class EvaluationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tasks: List[Path] = Field(default_factory=list)
    leaderboard: Optional[Path] = None
    team: str = "ours"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    manifest: Path
    seed: int = Field(..., ge=0)
    layout: Union[Literal["default"], Dict, Path] = "default"
    normalize_slots: bool = False
    compression: CompressionSettings = Field(default_factory=CompressionSettings)
    refiner: RefinerSettings = Field(default_factory=RefinerSettings)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    output_dir: Path = Field(default_factory=lambda: Path(OUTPUT_CONFIG["output_dir"]))

    @model_validator(mode="after")
    def _paths_exist(self) -> "PipelineConfig":
        paths = [self.manifest, *self.evaluation.tasks]
        if isinstance(self.layout, Path):
            paths.append(self.layout)
        if self.evaluation.leaderboard is not None:
            paths.append(self.evaluation.leaderboard)
        missing = [str(p) for p in paths if not Path(p).exists()]
        if missing:
            raise ValueError(f"Referenced files do not exist: {missing}")
        return self

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path) -> "PipelineConfig":
        try:
            return cls.model_validate(resolve_config_paths(data, Path(base_dir)))
        except ValidationError as e:
            raise ConfigError(f"Invalid pipeline config: {e}") from e

    @classmethod
    def from_json_string(cls, json_string: str, base_dir: Path = Path(".")) -> "PipelineConfig":
        try:
            data = json.loads(json_string)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Pipeline config is not valid JSON: {e}") from e
        return cls.from_dict(data, base_dir)

    @classmethod
    def from_file(cls, file_path: Path) -> "PipelineConfig":
        file_path = Path(file_path)
        if not file_path.exists():
            raise ConfigError(f"Config file not found: {file_path}")
        if file_path.suffix == ".toml":
            try:
                with open(file_path, "rb") as f:
                    data = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{file_path}: invalid TOML: {e}") from e
            return cls.from_dict(data, file_path.parent)
        return cls.from_json_string(file_path.read_text(encoding="utf-8"), file_path.parent)


def resolve_config_paths(data: dict, base_dir: Path) -> dict:
    """Anchors relative paths in a raw config dict at the file that names them."""
    data = dict(data)

    def anchor(value):
        p = Path(value)
        return str(p if p.is_absolute() else base_dir / p)

    if "manifest" in data:
        data["manifest"] = anchor(data["manifest"])
    if isinstance(data.get("layout"), str) and data["layout"] != "default":
        data["layout"] = anchor(data["layout"])
    if "output_dir" in data:
        data["output_dir"] = anchor(data["output_dir"])
    evaluation = dict(data.get("evaluation") or {})
    if evaluation:
        evaluation["tasks"] = [anchor(t) for t in evaluation.get("tasks", [])]
        if evaluation.get("leaderboard"):
            evaluation["leaderboard"] = anchor(evaluation["leaderboard"])
        data["evaluation"] = evaluation
    return data
