import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from geoembed_common.errors import ConfigError

from .pipeline_config import PipelineConfig

logger = logging.getLogger(__name__)

_pipeline_config: Optional[PipelineConfig] = None


def apply_overrides(cfg: PipelineConfig, overrides: Optional[Dict[str, Any]]) -> PipelineConfig:
    """Command-line values win over the file; None means "not given"."""
    updates = {k: v for k, v in (overrides or {}).items() if v is not None}
    if not updates:
        return cfg
    try:
        return PipelineConfig.model_validate({**cfg.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigError(f"Invalid override {sorted(updates)}: {e}") from e


def load_pipeline_config(
    config_path: Path,
    overrides: Optional[Dict[str, Any]] = None,
) -> PipelineConfig:
    global _pipeline_config
    cfg = PipelineConfig.from_file(config_path)
    _pipeline_config = apply_overrides(cfg, overrides)
    logger.info(f"Loaded pipeline config from {config_path} (seed={_pipeline_config.seed})")
    return _pipeline_config


def get_pipeline_config() -> PipelineConfig:
    if _pipeline_config is None:
        raise ConfigError(
            "Pipeline configuration not loaded. Call load_pipeline_config() first."
        )
    return _pipeline_config
