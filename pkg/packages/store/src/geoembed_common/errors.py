from typing import Optional


class GeoEmbedError(Exception):
    """Base error for the toolkit. `code` is stable and machine-readable."""

    code: str = "geoembed_error"
    stage: Optional[str] = None

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), "stage": self.stage}


class StoreError(GeoEmbedError):
    code = "store_error"


class BadMagicError(StoreError):
    code = "bad_magic"


class TruncatedFileError(StoreError):
    code = "truncated_payload"


class SizeMismatchError(StoreError):
    code = "size_mismatch"


class NonFiniteValuesError(StoreError):
    code = "non_finite_values"


class InvalidHeaderError(StoreError):
    code = "invalid_header"


class RowAlignmentError(StoreError):
    code = "row_alignment"


class ManifestError(StoreError):
    code = "invalid_manifest"


class MetadataError(StoreError):
    code = "invalid_metadata"


class DimensionMismatchError(GeoEmbedError):
    code = "dimension_mismatch"


class ConfigError(GeoEmbedError):
    code = "invalid_config"


class StoreIOError(StoreError):
    code = "io_error"
    stage = "store"
