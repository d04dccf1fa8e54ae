"""Per-sample label reliability.

A training sample's reliability is 1/k*, where k* is the smallest odd
neighborhood size in a fixed ladder at which a leave-one-out vote among its
nearest neighbors recovers its own label.  Samples that no rung of the
ladder classifies correctly get the floor value 1/k_max, which makes them
indistinguishable from samples that first succeed exactly at k_max; the
floor is also the filter threshold, so both kinds are dropped together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CapacityError, ValidationError
from .neighbors import DEFAULT_BLOCK_SIZE, nearest_neighbors
from .store import LabeledDataset

DEFAULT_K_MIN = 11
DEFAULT_K_MAX = 51


@dataclass(frozen=True)
class ReliabilityConfig:
    """Odd neighborhood ladder k_min, k_min+2, ..., k_max."""

    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX

    def __post_init__(self) -> None:
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValidationError("need 1 <= k_min <= k_max")
        if self.k_min % 2 == 0 or self.k_max % 2 == 0:
            raise ValidationError("k_min and k_max must both be odd")

    def ladder(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1, 2))

    @property
    def min_eta(self) -> float:
        return 1.0 / self.k_max


@dataclass(frozen=True)
class ReliabilityMap:
    """Reliability weights and neighborhood sizes, keyed by sample id.

    ``entries`` holds the vote weights (eta); ``neighborhood`` holds the
    integer k* each sample earned.  They are stored separately so that
    rescaling all weights by a positive constant, which must not change any
    weighted-vote outcome, leaves the neighborhood sizes untouched.
    """

    entries: dict[int, float]
    neighborhood: dict[int, int]
    k_max: int
    _sorted_ids: np.ndarray = field(init=False, repr=False, compare=False)
    _sorted_eta: np.ndarray = field(init=False, repr=False, compare=False)
    _sorted_k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if set(self.entries) != set(self.neighborhood):
            raise ValidationError("entries and neighborhood must share one key set")
        if self.k_max < 1:
            raise ValidationError("k_max must be >= 1")
        ids = np.fromiter(self.entries.keys(), dtype=np.uint64, count=len(self.entries))
        order = np.argsort(ids)
        ids = ids[order]
        eta = np.array([self.entries[int(i)] for i in ids], dtype=np.float64)
        kst = np.array([self.neighborhood[int(i)] for i in ids], dtype=np.int64)
        if eta.size and (not np.all(np.isfinite(eta)) or np.any(eta <= 0)):
            raise ValidationError("reliability weights must be finite and positive")
        if np.any(kst < 1):
            raise ValidationError("neighborhood sizes must be >= 1")
        object.__setattr__(self, "_sorted_ids", ids)
        object.__setattr__(self, "_sorted_eta", eta)
        object.__setattr__(self, "_sorted_k", kst)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def min_eta(self) -> float:
        return 1.0 / self.k_max

    def _locate(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.uint64)
        pos = np.searchsorted(self._sorted_ids, ids)
        bad = (pos >= self._sorted_ids.size) | (
            self._sorted_ids[np.minimum(pos, self._sorted_ids.size - 1)] != ids
        )
        if np.any(bad):
            missing = ids[np.nonzero(bad)[0][0]]
            raise KeyError(f"sample id {int(missing)} not in reliability map")
        return pos

    def eta_for(self, ids: np.ndarray) -> np.ndarray:
        """Vote weights for an array of ids (any shape)."""
        ids = np.asarray(ids, dtype=np.uint64)
        return self._sorted_eta[self._locate(ids.ravel())].reshape(ids.shape)

    def k_star_for(self, ids: np.ndarray) -> np.ndarray:
        """Neighborhood sizes for an array of ids (any shape)."""
        ids = np.asarray(ids, dtype=np.uint64)
        return self._sorted_k[self._locate(ids.ravel())].reshape(ids.shape)

    def scaled(self, factor: float) -> "ReliabilityMap":
        """All weights multiplied by ``factor``; neighborhoods unchanged."""
        if not factor > 0:
            raise ValidationError("scale factor must be positive")
        return ReliabilityMap(
            {i: e * factor for i, e in self.entries.items()},
            dict(self.neighborhood),
            self.k_max,
        )

    @classmethod
    def constant(cls, ids: np.ndarray, k_star: int, k_max: int) -> "ReliabilityMap":
        """Uniform map: every sample gets the same k* and weight 1/k*."""
        eta = 1.0 / k_star
        return cls(
            {int(i): eta for i in np.asarray(ids, dtype=np.uint64)},
            {int(i): k_star for i in np.asarray(ids, dtype=np.uint64)},
            k_max,
        )

    def to_rows(self) -> list[tuple[int, float, int]]:
        """(id, eta, k_star) triples sorted by id, for report output."""
        return [
            (int(i), float(e), int(k))
            for i, e, k in zip(self._sorted_ids, self._sorted_eta, self._sorted_k)
        ]


def compute_reliability_map(
    train: LabeledDataset,
    config: ReliabilityConfig | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> ReliabilityMap:
    """Leave-one-out ladder scan over the whole training set.

    Each sample is held out of its own candidate pool by id; duplicates of
    it under other ids still participate.  The scan walks the ladder from
    k_min upward and stops at the first rung whose plain majority vote
    matches the stored label.
    """
    config = config or ReliabilityConfig()
    k_max = config.k_max
    if train.n - 1 < k_max:
        raise CapacityError(
            f"reliability ladder up to {k_max} needs at least {k_max + 1} "
            f"training samples, got {train.n}"
        )
    ladder = np.array(config.ladder())
    num_classes = train.num_classes
    eta = np.empty(train.n, dtype=np.float64)
    k_star = np.empty(train.n, dtype=np.int64)

    for lo in range(0, train.n, block_size):
        hi = min(lo + block_size, train.n)
        nl = nearest_neighbors(
            train.embeddings[lo:hi],
            train.embeddings,
            train.ids,
            k_max,
            exclude_ids=train.ids[lo:hi],
            block_size=block_size,
        )
        b = hi - lo
        neighbor_labels = train.labels[nl.indices]  # (b, k_max)
        onehot = np.zeros((b, k_max, num_classes), dtype=np.int64)
        onehot[
            np.repeat(np.arange(b), k_max),
            np.tile(np.arange(k_max), b),
            neighbor_labels.ravel(),
        ] = 1
        prefix = np.cumsum(onehot, axis=1)  # tallies after each neighbor
        # winners at every ladder rung; argmax prefers the smaller class on ties
        rung_pred = np.argmax(prefix[:, ladder - 1, :], axis=2)  # (b, n_rungs)
        correct = rung_pred == train.labels[lo:hi, None]
        first = np.argmax(correct, axis=1)
        hit = correct.any(axis=1)
        ks = np.where(hit, ladder[first], k_max)
        k_star[lo:hi] = ks
        eta[lo:hi] = 1.0 / ks

    return ReliabilityMap(
        {int(i): float(e) for i, e in zip(train.ids, eta)},
        {int(i): int(k) for i, k in zip(train.ids, k_star)},
        k_max,
    )


def filter_unreliable(
    train: LabeledDataset, rmap: ReliabilityMap
) -> LabeledDataset:
    """Keep only samples whose weight strictly exceeds the 1/k_max floor.

    Samples sitting exactly on the floor (never classified correctly, or
    first correct only at k_max itself) are dropped.  The result may be
    empty.
    """
    eta = rmap.eta_for(train.ids)
    keep = np.nonzero(eta > rmap.min_eta)[0]
    return train.take(keep)
