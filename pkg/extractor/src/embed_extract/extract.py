"""Folder-to-EVEC extraction pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .backbones import DEFAULT_MODEL, load_backbone
from .errors import ExtractionError, ImageDecodeError
from .evec import write_evec
from .images import decode_image, scan_folder

log = logging.getLogger("embed_extract")

DECODE_ERROR_MODES = ("abort", "skip")


@dataclass(frozen=True)
class ExtractionManifest:
    """What was extracted, from where, through which model."""

    model: str
    source: str
    image_count: int
    dim: int
    num_classes: int
    class_names: tuple[str, ...]
    sha256: str
    skipped: tuple[str, ...]

    def to_json(self) -> dict:
        out = asdict(self)
        out["class_names"] = list(self.class_names)
        out["skipped"] = list(self.skipped)
        return out


def manifest_path(out_path: str | Path) -> Path:
    p = Path(out_path)
    return p.with_name(p.name + ".manifest.json")


def extract_embeddings(
    source: str | Path,
    out_path: str | Path,
    model_id: str = DEFAULT_MODEL,
    batch_size: int = 32,
    on_decode_error: str = "abort",
) -> ExtractionManifest:
    """Run ``model_id`` over every image under ``source`` and write EVEC v1.

    Images are visited in sorted (class folder, file name) order and ids
    enumerate the kept rows, so reruns over the same tree are byte-identical.
    Undecodable files abort the run or are skipped with a log line, per
    ``on_decode_error``.  A JSON manifest lands next to the output file.
    """
    if batch_size < 1:
        raise ExtractionError("batch size must be at least 1")
    if on_decode_error not in DECODE_ERROR_MODES:
        raise ExtractionError(
            f"on_decode_error must be one of {DECODE_ERROR_MODES}"
        )
    index = scan_folder(source)
    backbone = load_backbone(model_id)

    blocks: list[np.ndarray] = []
    labels: list[int] = []
    skipped: list[str] = []
    batch_images, batch_labels = [], []

    def flush() -> None:
        if not batch_images:
            return
        blocks.append(backbone.encode(batch_images))
        labels.extend(batch_labels)
        batch_images.clear()
        batch_labels.clear()

    for entry in index.entries:
        try:
            img = decode_image(entry.path)
        except ImageDecodeError:
            if on_decode_error == "abort":
                raise
            log.warning("skipping undecodable image %s", entry.path)
            skipped.append(str(entry.path))
            continue
        batch_images.append(img)
        batch_labels.append(entry.label)
        if len(batch_images) == batch_size:
            flush()
    flush()

    if not blocks:
        raise ExtractionError(f"no decodable images under {source}")
    embeddings = np.vstack(blocks).astype(np.float32)
    n = embeddings.shape[0]
    write_evec(
        out_path,
        embeddings,
        np.asarray(labels, dtype=np.int32),
        np.arange(n, dtype=np.uint64),
        len(index.class_names),
    )
    digest = hashlib.sha256(Path(out_path).read_bytes()).hexdigest()
    manifest = ExtractionManifest(
        model=backbone.name,
        source=str(source),
        image_count=n,
        dim=backbone.dim,
        num_classes=len(index.class_names),
        class_names=index.class_names,
        sha256=digest,
        skipped=tuple(skipped),
    )
    manifest_path(out_path).write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n"
    )
    return manifest
