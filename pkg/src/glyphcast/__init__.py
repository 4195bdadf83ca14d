"""glyphcast: structure-based ASCII art by classifying image tiles as glyphs."""

from glyphcast.core import (
    AsciiGrid,
    Charset,
    DataError,
    Dataset,
    FeatureMode,
    FormatError,
    GlyphcastError,
    GrayImage,
    ModelArtifact,
    ModelError,
    ModelKind,
    StageError,
    Tile,
    UsageError,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AsciiGrid",
    "Charset",
    "DataError",
    "Dataset",
    "FeatureMode",
    "FormatError",
    "GlyphcastError",
    "GrayImage",
    "ModelArtifact",
    "ModelError",
    "ModelKind",
    "StageError",
    "Tile",
    "UsageError",
    "validate",
    "__version__",
]
