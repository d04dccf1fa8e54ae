"""Corpus data model: labeled embedding datasets, the EVEC v1 container,
standardization, subsampling, and the synthetic mixture generator.

EVEC v1 layout (little-endian throughout)::

    magic   4 bytes  b"EVEC"
    version u16      1
    flags   u16      0 (reserved)
    n       u64      sample count
    d       u32      embedding dimension
    C       u32      number of classes
    payload n*d f32  embeddings, row-major
            n   i32  labels, each in [0, C)
            n   u64  ids, unique

An optional JSON sidecar ``<file>.meta.json`` may carry class names and
provenance; it is never required for correctness.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import CapacityError, CorruptionError, FormatError, ValidationError
from .rng import stream_rng

EVEC_MAGIC = b"EVEC"
EVEC_VERSION = 1
_HEADER = struct.Struct("<4sHHQII")

STD_FLOOR = 1e-8


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable (embeddings, labels, ids) triple with a fixed class count.

    Attributes
    ----------
    embeddings : float32 array of shape (n, d)
    labels : int64 array of shape (n,), values in [0, num_classes)
    ids : uint64 array of shape (n,), unique within the dataset
    num_classes : int
    """

    embeddings: np.ndarray
    labels: np.ndarray
    ids: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        emb = np.ascontiguousarray(np.asarray(self.embeddings, dtype=np.float32))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        ids = np.ascontiguousarray(np.asarray(self.ids, dtype=np.uint64))
        if emb.ndim != 2:
            raise ValidationError("embeddings must be a 2-D matrix")
        n, d = emb.shape
        # n == 0 is tolerated so that filters can hand back an empty subset;
        # d and num_classes must always be meaningful.
        if d < 1:
            raise ValidationError("embedding dimension must be >= 1")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        if labels.shape != (n,) or ids.shape != (n,):
            raise ValidationError("labels and ids must both have length n")
        if not np.all(np.isfinite(emb)):
            raise ValidationError("embeddings contain NaN or infinity")
        if n > 0:
            if labels.min() < 0 or labels.max() >= self.num_classes:
                raise ValidationError(
                    f"labels must lie in [0, {self.num_classes}); "
                    f"found range [{labels.min()}, {labels.max()}]"
                )
            if np.unique(ids).size != n:
                raise ValidationError("ids must be unique within the dataset")
        object.__setattr__(self, "embeddings", _as_readonly(emb))
        object.__setattr__(self, "labels", _as_readonly(labels))
        object.__setattr__(self, "ids", _as_readonly(ids))

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def take(self, indices: np.ndarray) -> "LabeledDataset":
        """Row subset; ids travel with their rows."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            self.embeddings[idx], self.labels[idx], self.ids[idx], self.num_classes
        )

    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        """Same rows and ids, different labels (noise injection)."""
        return LabeledDataset(self.embeddings, labels, self.ids, self.num_classes)

    def with_embeddings(self, embeddings: np.ndarray) -> "LabeledDataset":
        """Same labels and ids, transformed embeddings (projection)."""
        return LabeledDataset(embeddings, self.labels, self.ids, self.num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column mean and floored standard deviation of a training set."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValidationError("mean and std must be 1-D vectors of equal length")
        if np.any(std < STD_FLOOR):
            raise ValidationError(f"std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", _as_readonly(mean))
        object.__setattr__(self, "std", _as_readonly(std))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the isotropic Gaussian mixture generator."""

    d: int
    num_classes: int
    samples_per_class: int
    mean_scale: float
    noise_sigma: float
    seed: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValidationError("d must be >= 1")
        if self.num_classes < 2:
            raise ValidationError("num_classes must be >= 2")
        if self.samples_per_class < 1:
            raise ValidationError("samples_per_class must be >= 1")
        if not self.mean_scale > 0:
            raise ValidationError("mean_scale must be > 0")
        if not self.noise_sigma > 0:
            raise ValidationError("noise_sigma must be > 0")


# ---------------------------------------------------------------------------
# EVEC v1 I/O


def save_dataset(dataset: LabeledDataset, path: str | Path) -> None:
    """Write ``dataset`` to ``path`` in EVEC v1. Bytes are deterministic."""
    header = _HEADER.pack(
        EVEC_MAGIC, EVEC_VERSION, 0, dataset.n, dataset.d, dataset.num_classes
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dataset.embeddings.astype("<f4", copy=False).tobytes())
        fh.write(dataset.labels.astype("<i4").tobytes())
        fh.write(dataset.ids.astype("<u8", copy=False).tobytes())


def load_dataset(path: str | Path) -> LabeledDataset:
    """Read an EVEC v1 file.

    Raises
    ------
    FormatError
        Wrong magic bytes or unsupported version.
    CorruptionError
        Payload shorter or longer than the header declares.
    ValidationError
        Decoded fields violate dataset invariants (label range, id
        uniqueness, non-finite embeddings).
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorruptionError(f"{path}: file shorter than the EVEC header")
    magic, version, _flags, n, d, num_classes = _HEADER.unpack_from(raw, 0)
    if magic != EVEC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {EVEC_MAGIC!r}")
    if version != EVEC_VERSION:
        raise FormatError(f"{path}: unsupported EVEC version {version}")
    expected = _HEADER.size + n * d * 4 + n * 4 + n * 8
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(raw)} bytes, header declares {expected}"
        )
    off = _HEADER.size
    emb = np.frombuffer(raw, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += n * d * 4
    labels = np.frombuffer(raw, dtype="<i4", count=n, offset=off)
    off += n * 4
    ids = np.frombuffer(raw, dtype="<u8", count=n, offset=off)
    return LabeledDataset(emb, labels, ids, num_classes)


def write_sidecar(path: str | Path, meta: dict) -> None:
    """Write the optional ``<file>.meta.json`` sidecar."""
    Path(f"{path}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_sidecar(path: str | Path) -> dict | None:
    sidecar = Path(f"{path}.meta.json")
    if not sidecar.exists():
        return None
    return json.loads(sidecar.read_text())


# ---------------------------------------------------------------------------
# Preprocessing


def standardize(
    train: LabeledDataset, others: Sequence[LabeledDataset] = ()
) -> tuple[LabeledDataset, list[LabeledDataset], StandardizationStats]:
    """Zero-mean/unit-variance columns, with statistics taken from ``train``.

    Constant columns get their std floored at ``STD_FLOOR`` and map to zero.
    Every dataset in ``others`` is transformed with the train statistics.
    """
    if train.n < 2:
        raise ValidationError("standardize needs at least 2 training samples")
    x = train.embeddings.astype(np.float64)
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    stats = StandardizationStats(mean, std)

    def apply(ds: LabeledDataset) -> LabeledDataset:
        if ds.d != train.d:
            raise ValidationError("dimension mismatch with training statistics")
        return ds.with_embeddings((ds.embeddings.astype(np.float64) - mean) / std)

    return apply(train), [apply(ds) for ds in others], stats


def destandardize(dataset: LabeledDataset, stats: StandardizationStats) -> LabeledDataset:
    """Inverse of :func:`standardize` wherever std exceeded the floor."""
    x = dataset.embeddings.astype(np.float64) * stats.std + stats.mean
    return dataset.with_embeddings(x)


def l2_normalize(dataset: LabeledDataset) -> LabeledDataset:
    """Scale every row to unit Euclidean norm (norms floored at 1e-12)."""
    x = dataset.embeddings.astype(np.float64)
    norms = np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-12)
    return dataset.with_embeddings(x / norms)


# ---------------------------------------------------------------------------
# Subsampling


def stratified_subsample(
    dataset: LabeledDataset, per_class: int, seed: int
) -> LabeledDataset:
    """Draw exactly ``per_class`` samples from every class, without replacement.

    Selection is keyed by sample id (not row position), so permuting the
    parent's rows does not change which ids are drawn for a given seed.
    """
    if per_class < 1:
        raise ValidationError("per_class must be >= 1")
    rng = stream_rng(seed, "subsample")
    keep: list[np.ndarray] = []
    for cls in range(dataset.num_classes):
        rows = np.nonzero(dataset.labels == cls)[0]
        if rows.size < per_class:
            raise CapacityError(
                f"class {cls} has {rows.size} samples, need {per_class}"
            )
        rows = rows[np.argsort(dataset.ids[rows], kind="stable")]
        keep.append(rng.permutation(rows)[:per_class])
    idx = np.sort(np.concatenate(keep))
    return dataset.take(idx)


def long_tail_target_counts(n_max: int, num_classes: int, ratio: float) -> list[int]:
    """Closed-form per-class counts: ``round(n_max * ratio**(c/(C-1)))``.

    Rounding is half-away-from-zero, so the head keeps ``n_max`` and the
    tail keeps ``round(n_max * ratio)`` exactly.
    """
    if not 0 < ratio <= 1:
        raise ValidationError("imbalance ratio must lie in (0, 1]")
    if num_classes < 2:
        raise ValidationError("long-tail construction needs >= 2 classes")
    counts = []
    for c in range(num_classes):
        target = n_max * ratio ** (c / (num_classes - 1))
        counts.append(int(math.floor(target + 0.5)))
    return counts


def long_tail_subsample(
    dataset: LabeledDataset, imbalance_ratio: float, seed: int
) -> LabeledDataset:
    """Exponentially decaying class sizes, head class 0 kept in full."""
    rng = stream_rng(seed, "subsample")
    n_max = int(np.sum(dataset.labels == 0))
    if n_max == 0:
        raise CapacityError("class 0 (the head class) has no samples")
    counts = long_tail_target_counts(n_max, dataset.num_classes, imbalance_ratio)
    keep: list[np.ndarray] = []
    for cls, want in enumerate(counts):
        rows = np.nonzero(dataset.labels == cls)[0]
        if rows.size < want:
            raise CapacityError(
                f"class {cls} has {rows.size} samples, long-tail schedule needs {want}"
            )
        rows = rows[np.argsort(dataset.ids[rows], kind="stable")]
        keep.append(rng.permutation(rows)[:want])
    idx = np.sort(np.concatenate(keep))
    return dataset.take(idx)


# ---------------------------------------------------------------------------
# Synthetic corpus


def generate_synthetic_mixture(spec: SyntheticSpec) -> LabeledDataset:
    """Isotropic Gaussian mixture with one cluster per class.

    Class means are drawn i.i.d. from N(0, mean_scale^2 I); each sample from
    N(mean_c, noise_sigma^2 I).  Labels come out class-blocked and balanced;
    ids are 0..n-1.  All draws go through the "synthetic" Philox stream, so
    identical specs reproduce identical datasets.
    """
    rng = stream_rng(spec.seed, "synthetic")
    means = rng.normal(0.0, spec.mean_scale, size=(spec.num_classes, spec.d))
    blocks = []
    for c in range(spec.num_classes):
        blocks.append(
            rng.normal(means[c], spec.noise_sigma, size=(spec.samples_per_class, spec.d))
        )
    emb = np.concatenate(blocks, axis=0)
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    ids = np.arange(emb.shape[0], dtype=np.uint64)
    return LabeledDataset(emb, labels, ids, spec.num_classes)


def split_train_test(
    dataset: LabeledDataset, test_per_class: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified split: ``test_per_class`` rows per class go to the test side."""
    test = stratified_subsample(dataset, test_per_class, seed)
    test_ids = set(test.ids.tolist())
    train_rows = np.array(
        [i for i, sid in enumerate(dataset.ids.tolist()) if sid not in test_ids],
        dtype=np.int64,
    )
    return dataset.take(train_rows), test
