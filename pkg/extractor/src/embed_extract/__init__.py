"""Image-folder to EVEC embedding extractor."""

from .backbones import (
    Backbone,
    DEFAULT_MODEL,
    available_models,
    load_backbone,
    model_dim,
)
from .errors import (
    ExtractionError,
    FolderLayoutError,
    ImageDecodeError,
    ModelUnavailableError,
)
from .evec import read_evec, write_evec
from .extract import (
    DECODE_ERROR_MODES,
    ExtractionManifest,
    extract_embeddings,
    manifest_path,
)
from .images import IMAGE_EXTENSIONS, FolderIndex, ImageEntry, decode_image, scan_folder

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "DECODE_ERROR_MODES",
    "DEFAULT_MODEL",
    "ExtractionError",
    "ExtractionManifest",
    "FolderIndex",
    "FolderLayoutError",
    "IMAGE_EXTENSIONS",
    "ImageDecodeError",
    "ImageEntry",
    "ModelUnavailableError",
    "available_models",
    "decode_image",
    "extract_embeddings",
    "load_backbone",
    "manifest_path",
    "model_dim",
    "read_evec",
    "scan_folder",
    "write_evec",
]
