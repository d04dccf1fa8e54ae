"""Folder scanning and image decoding.

One class per subfolder is the annotation convention: subfolder names sort
into class indices 0..C-1 and every image inherits its folder's class.  A
folder with no subfolders is treated as a single unlabeled bucket.  Mixing
the two layouts is rejected rather than guessed at.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .errors import FolderLayoutError, ImageDecodeError

IMAGE_EXTENSIONS = {
    ".bmp",
    ".gif",
    ".jpeg",
    ".jpg",
    ".png",
    ".tif",
    ".tiff",
    ".webp",
}


@dataclass(frozen=True)
class ImageEntry:
    path: Path
    label: int


@dataclass(frozen=True)
class FolderIndex:
    entries: tuple[ImageEntry, ...]
    class_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.entries)


def _image_files(folder: Path) -> list[Path]:
    return sorted(
        f
        for f in folder.iterdir()
        if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS
    )


def scan_folder(root: str | Path) -> FolderIndex:
    """Index every image under ``root`` in a stable, sorted order."""
    root = Path(root)
    if not root.is_dir():
        raise FolderLayoutError(f"{root} is not a directory")
    subdirs = sorted(d for d in root.iterdir() if d.is_dir())
    loose = _image_files(root)
    if subdirs and loose:
        raise FolderLayoutError(
            f"{root} mixes class subfolders with loose image files"
        )
    if not subdirs:
        if not loose:
            raise FolderLayoutError(f"no images found under {root}")
        entries = tuple(ImageEntry(f, 0) for f in loose)
        return FolderIndex(entries, ("unlabeled",))

    # only subfolders that actually hold images become classes, so labels
    # stay a dense 0..C-1 range
    per_class = [(d.name, _image_files(d)) for d in subdirs]
    per_class = [(name, files) for name, files in per_class if files]
    if not per_class:
        raise FolderLayoutError(f"no images found under {root}")
    entries = tuple(
        ImageEntry(f, label)
        for label, (_, files) in enumerate(per_class)
        for f in files
    )
    return FolderIndex(entries, tuple(name for name, _ in per_class))


def decode_image(path: Path) -> Image.Image:
    """Load an image as RGB; failures raise with the offending path named."""
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc
