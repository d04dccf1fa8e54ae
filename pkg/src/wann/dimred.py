"""Linear dimensionality reduction: PCA, Fisher LDA, and filtered LDA.

All three produce a :class:`Projection` (mean + axis rows) that maps
x -> (x - mean) . components^T.  LDA regularizes the within-class scatter
with a scale-aware ridge and solves the symmetric-definite generalized
eigenproblem; filtered LDA first drops training samples whose reliability
sits at the 1/k_max floor, then fits on what survives.

Projections serialize to the EPRJ v1 binary block and to JSON.

EPRJ v1 layout (little-endian)::

    magic   4 bytes  b"EPRJ"
    version u16      1
    kind    u8       0=pca 1=lda 2=flda
    flags   u8       bit0 rank_deficient, bit1 degenerate, bit2 has ratios
    p       u32      number of axes
    d       u32      input dimension
    fit_n   u64      samples the fit actually used
    payload d   f64  mean
            p*d f64  components, row-major
            p   f64  explained-variance ratios, present iff bit2
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .exceptions import CorruptionError, FormatError, ValidationError
from .reliability import ReliabilityMap, filter_unreliable
from .store import LabeledDataset

EPRJ_MAGIC = b"EPRJ"
EPRJ_VERSION = 1
_EPRJ_HEADER = struct.Struct("<4sHBBIIQ")

_KIND_CODES = {"pca": 0, "lda": 1, "flda": 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

LDA_RIDGE_SCALE = 1e-4
_DEGENERATE_EIGENVALUE = 1e-8


@dataclass(frozen=True)
class Projection:
    """A fitted linear map onto ``p`` axes.

    ``rank_deficient`` marks a PCA fit that could not supply every
    requested axis; ``degenerate`` marks an LDA fit whose class means were
    indistinguishable (axes are returned but carry no separation).
    """

    mean: np.ndarray
    components: np.ndarray  # (p, d), rows are axes
    kind: str
    fit_sample_count: int
    explained_variance_ratio: np.ndarray | None = None
    rank_deficient: bool = False
    degenerate: bool = False

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        comp = np.asarray(self.components, dtype=np.float64)
        if self.kind not in _KIND_CODES:
            raise ValidationError(f"unknown projection kind {self.kind!r}")
        if mean.ndim != 1:
            raise ValidationError("mean must be 1-D")
        if comp.ndim != 2 or comp.shape[1] != mean.shape[0]:
            raise ValidationError("components must be (p, d) with d = len(mean)")
        if comp.shape[0] > comp.shape[1]:
            raise ValidationError("cannot have more axes than input dimensions")
        evr = self.explained_variance_ratio
        if evr is not None:
            evr = np.asarray(evr, dtype=np.float64)
            if evr.shape != (comp.shape[0],):
                raise ValidationError("one variance ratio per component required")
            evr.flags.writeable = False
        mean.flags.writeable = False
        comp.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "explained_variance_ratio", evr)

    @property
    def p(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def _normalize_signs(components: np.ndarray) -> np.ndarray:
    """Flip each axis so its largest-magnitude entry is positive."""
    out = components.copy()
    for row in out:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return out


def fit_pca(train: LabeledDataset, n_components: int) -> Projection:
    """Principal axes by descending explained variance.

    If the data's rank falls short of ``n_components``, the fit returns the
    axes that exist and sets ``rank_deficient`` instead of fabricating
    noise directions.
    """
    if train.n < 2:
        raise ValidationError("PCA needs at least 2 samples")
    if not 1 <= n_components <= min(train.n - 1, train.d):
        raise ValidationError(
            f"n_components must lie in [1, {min(train.n - 1, train.d)}]"
        )
    x = train.embeddings.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    # rank tolerance keyed to float32, the dataset storage precision
    tol = s[0] * max(train.n, train.d) * np.finfo(np.float32).eps if s.size else 0.0
    rank = int(np.count_nonzero(s > tol))
    p = min(n_components, rank)
    variances = s**2 / (train.n - 1)
    total = variances.sum()
    evr = variances[:p] / total if total > 0 else np.zeros(p)
    return Projection(
        mean,
        _normalize_signs(vt[:p]),
        "pca",
        train.n,
        explained_variance_ratio=evr,
        rank_deficient=rank < n_components,
    )


def _scatter_matrices(
    train: LabeledDataset,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[int]]:
    x = train.embeddings.astype(np.float64)
    present = [int(c) for c in np.unique(train.labels)]
    if len(present) < 2:
        raise ValidationError(
            f"LDA needs >= 2 populated classes, found {len(present)}"
        )
    d = train.d
    mean = x.mean(axis=0)
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for c in present:
        xc = x[train.labels == c]
        if xc.shape[0] < 2:
            raise ValidationError(f"class {c} has only one sample; LDA needs >= 2")
        mu = xc.mean(axis=0)
        centered = xc - mu
        s_w += centered.T @ centered
        gap = (mu - mean)[:, None]
        s_b += xc.shape[0] * (gap @ gap.T)
    return s_w, s_b, mean, present


def fit_lda(train: LabeledDataset) -> Projection:
    """Fisher discriminant axes.

    Maximizes between-class over within-class scatter via the generalized
    symmetric-definite eigenproblem S_b v = w (S_w + lambda I) v, with
    lambda = 1e-4 * trace(S_w)/d keeping the within-class side positive
    definite.  Up to C-1 axes come back ordered by eigenvalue; if every
    eigenvalue is numerically zero (coincident class means) the projection
    is flagged degenerate.
    """
    s_w, s_b, mean, present = _scatter_matrices(train)
    d = train.d
    ridge = LDA_RIDGE_SCALE * np.trace(s_w) / d
    # data with zero within-class spread still needs a solvable system
    ridge = max(ridge, 1e-12)
    eigvals, eigvecs = scipy.linalg.eigh(s_b, s_w + ridge * np.eye(d))
    order = np.argsort(eigvals)[::-1]
    p = min(len(present) - 1, d)
    top = order[:p]
    components = _normalize_signs(eigvecs[:, top].T)
    return Projection(
        mean,
        components,
        "lda",
        train.n,
        degenerate=bool(eigvals[top[0]] <= _DEGENERATE_EIGENVALUE),
    )


def fit_flda(train: LabeledDataset, rmap: ReliabilityMap) -> Projection:
    """LDA fitted only on samples above the reliability floor.

    The filter consumes weights in the space the map was computed in; the
    returned projection is then meant to transform the full train and test
    sets.
    """
    kept = filter_unreliable(train, rmap)
    survivors = set(np.unique(kept.labels).tolist())
    if len(survivors) < 2:
        emptied = sorted(set(np.unique(train.labels).tolist()) - survivors)
        raise ValidationError(
            f"reliability filter emptied classes {emptied}; "
            f"LDA needs >= 2 populated classes"
        )
    inner = fit_lda(kept)
    return Projection(
        inner.mean,
        inner.components,
        "flda",
        kept.n,
        degenerate=inner.degenerate,
    )


def project(data: LabeledDataset, proj: Projection) -> LabeledDataset:
    """Apply a fitted projection; labels and ids ride along unchanged."""
    if data.d != proj.d:
        raise ValidationError(
            f"projection expects width {proj.d}, dataset has {data.d}"
        )
    x = (data.embeddings.astype(np.float64) - proj.mean) @ proj.components.T
    return data.with_embeddings(x)


# ---------------------------------------------------------------------------
# Serialization


def save_projection(proj: Projection, path: str | Path) -> None:
    flags = (
        (1 if proj.rank_deficient else 0)
        | (2 if proj.degenerate else 0)
        | (4 if proj.explained_variance_ratio is not None else 0)
    )
    header = _EPRJ_HEADER.pack(
        EPRJ_MAGIC,
        EPRJ_VERSION,
        _KIND_CODES[proj.kind],
        flags,
        proj.p,
        proj.d,
        proj.fit_sample_count,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(proj.mean.astype("<f8", copy=False).tobytes())
        fh.write(proj.components.astype("<f8", copy=False).tobytes())
        if proj.explained_variance_ratio is not None:
            fh.write(proj.explained_variance_ratio.astype("<f8", copy=False).tobytes())


def load_projection(path: str | Path) -> Projection:
    raw = Path(path).read_bytes()
    if len(raw) < _EPRJ_HEADER.size:
        raise CorruptionError(f"{path}: file shorter than the EPRJ header")
    magic, version, kind_code, flags, p, d, fit_n = _EPRJ_HEADER.unpack_from(raw, 0)
    if magic != EPRJ_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {EPRJ_MAGIC!r}")
    if version != EPRJ_VERSION:
        raise FormatError(f"{path}: unsupported EPRJ version {version}")
    if kind_code not in _KIND_NAMES:
        raise FormatError(f"{path}: unknown projection kind code {kind_code}")
    has_evr = bool(flags & 4)
    expected = _EPRJ_HEADER.size + d * 8 + p * d * 8 + (p * 8 if has_evr else 0)
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(raw)} bytes, header declares {expected}"
        )
    off = _EPRJ_HEADER.size
    mean = np.frombuffer(raw, dtype="<f8", count=d, offset=off)
    off += d * 8
    comp = np.frombuffer(raw, dtype="<f8", count=p * d, offset=off).reshape(p, d)
    off += p * d * 8
    evr = np.frombuffer(raw, dtype="<f8", count=p, offset=off) if has_evr else None
    return Projection(
        mean,
        comp,
        _KIND_NAMES[kind_code],
        fit_n,
        explained_variance_ratio=evr,
        rank_deficient=bool(flags & 1),
        degenerate=bool(flags & 2),
    )


def projection_to_json(proj: Projection) -> dict:
    out = {
        "kind": proj.kind,
        "p": proj.p,
        "d": proj.d,
        "fit_sample_count": proj.fit_sample_count,
        "rank_deficient": proj.rank_deficient,
        "degenerate": proj.degenerate,
        "mean": proj.mean.tolist(),
        "components": proj.components.tolist(),
    }
    if proj.explained_variance_ratio is not None:
        out["explained_variance_ratio"] = proj.explained_variance_ratio.tolist()
    return out


def projection_from_json(payload: dict) -> Projection:
    try:
        return Projection(
            np.array(payload["mean"], dtype=np.float64),
            np.array(payload["components"], dtype=np.float64).reshape(
                payload["p"], payload["d"]
            ),
            payload["kind"],
            payload["fit_sample_count"],
            explained_variance_ratio=(
                np.array(payload["explained_variance_ratio"], dtype=np.float64)
                if "explained_variance_ratio" in payload
                else None
            ),
            rank_deficient=payload.get("rank_deficient", False),
            degenerate=payload.get("degenerate", False),
        )
    except KeyError as exc:
        raise FormatError(f"projection JSON missing field {exc}") from exc


def save_projection_json(proj: Projection, path: str | Path) -> None:
    Path(path).write_text(json.dumps(projection_to_json(proj), indent=2))


def load_projection_json(path: str | Path) -> Projection:
    return projection_from_json(json.loads(Path(path).read_text()))
