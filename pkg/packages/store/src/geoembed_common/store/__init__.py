from .embedding_matrix import (
    EmbeddingMatrix,
    check_rows_aligned,
    concat_columns,
    l2_normalize_rows,
    stack_rows,
)
from .embedding_io import load_embeddings, save_embeddings
from .manifest import Manifest, ManifestEntry
from .metadata import SampleMetadata, load_metadata, save_metadata

__all__ = [
    "EmbeddingMatrix",
    "Manifest",
    "ManifestEntry",
    "SampleMetadata",
    "check_rows_aligned",
    "concat_columns",
    "l2_normalize_rows",
    "load_embeddings",
    "load_metadata",
    "save_embeddings",
    "save_metadata",
    "stack_rows",
]
