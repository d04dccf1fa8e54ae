"""Minimal EVEC v1 writer/reader.

The on-disk layout is the contract shared with downstream consumers:
a little-endian 24-byte header (magic ``EVEC``, version, flags, row count,
embedding width, class count) followed by the float32 embedding block,
int32 labels, and uint64 row ids.  Anything this module writes must load
unchanged in any other EVEC v1 implementation, so the writer validates the
same invariants the readers enforce.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ExtractionError

MAGIC = b"EVEC"
VERSION = 1

_HEADER = struct.Struct("<4sHHQII")


def _check_payload(
    embeddings: np.ndarray,
    labels: np.ndarray,
    ids: np.ndarray,
    num_classes: int,
) -> None:
    if embeddings.ndim != 2:
        raise ExtractionError("embeddings must be a 2-D array")
    n, d = embeddings.shape
    if d < 1:
        raise ExtractionError("embedding width must be at least 1")
    if labels.shape != (n,) or ids.shape != (n,):
        raise ExtractionError("labels and ids must have one entry per row")
    if num_classes < 1:
        raise ExtractionError("class count must be at least 1")
    if not np.isfinite(embeddings).all():
        raise ExtractionError("embeddings must be finite")
    if n and (labels.min() < 0 or labels.max() >= num_classes):
        raise ExtractionError("labels must lie in [0, num_classes)")
    if len(np.unique(ids)) != n:
        raise ExtractionError("row ids must be unique")


def write_evec(
    path: str | Path,
    embeddings: np.ndarray,
    labels: np.ndarray,
    ids: np.ndarray,
    num_classes: int,
) -> None:
    embeddings = np.ascontiguousarray(embeddings, dtype=np.float32)
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    ids = np.ascontiguousarray(ids, dtype=np.uint64)
    _check_payload(embeddings, labels, ids, num_classes)
    n, d = embeddings.shape
    header = _HEADER.pack(MAGIC, VERSION, 0, n, d, num_classes)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(embeddings.tobytes())
        fh.write(labels.tobytes())
        fh.write(ids.tobytes())


def read_evec(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Decode an EVEC file; returns (embeddings, labels, ids, num_classes)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ExtractionError(f"{path}: shorter than the EVEC header")
    magic, version, _flags, n, d, num_classes = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ExtractionError(f"{path}: not an EVEC file")
    if version != VERSION:
        raise ExtractionError(f"{path}: unsupported EVEC version {version}")
    expected = _HEADER.size + n * d * 4 + n * 4 + n * 8
    if len(raw) != expected:
        raise ExtractionError(
            f"{path}: size mismatch, expected {expected} bytes, found {len(raw)}"
        )
    offset = _HEADER.size
    embeddings = np.frombuffer(raw, dtype="<f4", count=n * d, offset=offset)
    offset += n * d * 4
    labels = np.frombuffer(raw, dtype="<i4", count=n, offset=offset)
    offset += n * 4
    ids = np.frombuffer(raw, dtype="<u8", count=n, offset=offset)
    embeddings = embeddings.reshape(n, d).copy()
    labels = labels.astype(np.int32)
    ids = ids.astype(np.uint64)
    _check_payload(embeddings, labels, ids, num_classes)
    return embeddings, labels, ids, num_classes
