"""Multi-level 3D-asset captioning pipeline, metrics, and evaluation tools."""

__version__ = "0.1.0"

from .records import (  # noqa: F401
    AssetRecord,
    Dataset,
    LevelSet,
    RawMetadata,
    ValidationResult,
    build_manifest,
    extract_metadata,
    validate_record,
)
