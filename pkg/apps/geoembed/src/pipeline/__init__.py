from .config_loader import get_pipeline_config, load_pipeline_config
from .pipeline_config import PipelineConfig
from .pipeline_runner import PipelineResult, compress_slots, run_pipeline
from .provenance import (
    ProvenanceError,
    ProvenanceRecord,
    build_provenance,
    verify_provenance,
    write_provenance,
)
