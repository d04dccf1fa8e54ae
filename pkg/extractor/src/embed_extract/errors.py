"""Error taxonomy for the extraction pipeline."""


class ExtractionError(Exception):
    """Base class; anything the tool can reject on purpose."""


class FolderLayoutError(ExtractionError):
    """Input folder is missing, empty, or mixes class subfolders with
    loose image files."""


class ImageDecodeError(ExtractionError):
    """A candidate image file could not be decoded."""


class ModelUnavailableError(ExtractionError):
    """Requested backbone is unknown or failed to load; always fatal."""
