"""Nearest-neighbor classification over a labeled support set.

Three predictors share one voting engine:

* fixed k-NN: one global neighborhood size;
* adaptive k-NN: each query inherits the neighborhood size k* earned by its
  single nearest training sample;
* weighted adaptive k-NN: same neighborhoods, but every neighbor's vote
  counts with its reliability weight.

When an inherited neighborhood exceeds the support size, it is clamped to
the support size and the query is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .neighbors import DEFAULT_BLOCK_SIZE, nearest_neighbors
from .reliability import ReliabilityMap
from .store import LabeledDataset


@dataclass(frozen=True)
class Prediction:
    """Batched classification outcome.

    ``neighbor_ids`` and ``neighbor_sq_distances`` are kept only when the
    caller asked for evidence; rows are padded to the widest neighborhood,
    with ``k_used`` saying how many leading columns are real.
    """

    labels: np.ndarray  # (nq,) int64
    k_used: np.ndarray  # (nq,) int64
    clamped: np.ndarray  # (nq,) bool
    neighbor_ids: np.ndarray | None = None
    neighbor_sq_distances: np.ndarray | None = None

    def evidence_records(self) -> list[dict]:
        """One JSON-ready record per query, neighbors nearest first."""
        if self.neighbor_ids is None or self.neighbor_sq_distances is None:
            raise ValidationError("prediction was made without evidence")
        records = []
        for i in range(self.labels.shape[0]):
            k = int(self.k_used[i])
            records.append(
                {
                    "query_index": i,
                    "label": int(self.labels[i]),
                    "k_used": k,
                    "clamped": bool(self.clamped[i]),
                    "neighbor_ids": [int(v) for v in self.neighbor_ids[i, :k]],
                    "neighbor_distances": [
                        float(np.sqrt(v))
                        for v in self.neighbor_sq_distances[i, :k]
                    ],
                }
            )
        return records


def _check_queries(queries: np.ndarray, train: LabeledDataset) -> np.ndarray:
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != train.d:
        raise ValidationError(
            f"queries must be 2-D with width {train.d}, got shape {q.shape}"
        )
    if train.n == 0:
        raise ValidationError("support set is empty")
    return q


def _prefix_vote(
    neighbor_labels: np.ndarray,
    k_used: np.ndarray,
    num_classes: int,
    weights: np.ndarray | None,
) -> np.ndarray:
    """Vote over the first k_used[i] neighbors of each row.

    Accumulation order per (row, class) bucket is neighbor order, nearest
    first; ties take the smallest class index.
    """
    n, width = neighbor_labels.shape
    live = np.arange(width)[None, :] < k_used[:, None]
    w = live.astype(np.float64) if weights is None else weights * live
    tallies = np.zeros((n, num_classes), dtype=np.float64)
    np.add.at(
        tallies,
        (np.repeat(np.arange(n), width), neighbor_labels.ravel()),
        w.ravel(),
    )
    return np.argmax(tallies, axis=1).astype(np.int64)


def fixed_knn_predict(
    queries: np.ndarray,
    train: LabeledDataset,
    k: int,
    block_size: int = DEFAULT_BLOCK_SIZE,
    keep_evidence: bool = False,
) -> Prediction:
    """Plain k-NN with a single global neighborhood size."""
    q = _check_queries(queries, train)
    if k < 1:
        raise ValidationError("k must be >= 1")
    k_eff = min(k, train.n)
    nl = nearest_neighbors(
        q, train.embeddings, train.ids, k_eff, block_size=block_size
    )
    n_q = q.shape[0]
    k_used = np.full(n_q, k_eff, dtype=np.int64)
    labels = _prefix_vote(
        train.labels[nl.indices], k_used, train.num_classes, None
    )
    return Prediction(
        labels,
        k_used,
        np.full(n_q, k > train.n),
        nl.ids if keep_evidence else None,
        nl.sq_distances if keep_evidence else None,
    )


def adaptive_neighborhood_size(
    queries: np.ndarray,
    train: LabeledDataset,
    rmap: ReliabilityMap,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> np.ndarray:
    """k* of each query's single nearest training sample."""
    q = _check_queries(queries, train)
    nl = nearest_neighbors(q, train.embeddings, train.ids, 1, block_size=block_size)
    return rmap.k_star_for(nl.ids[:, 0])


def _adaptive_predict(
    queries: np.ndarray,
    train: LabeledDataset,
    rmap: ReliabilityMap,
    weighted: bool,
    block_size: int,
    keep_evidence: bool,
) -> Prediction:
    q = _check_queries(queries, train)
    k_t = adaptive_neighborhood_size(q, train, rmap, block_size=block_size)
    k_used = np.minimum(k_t, train.n)
    clamped = k_t > train.n
    width = int(k_used.max())
    nl = nearest_neighbors(
        q, train.embeddings, train.ids, width, block_size=block_size
    )
    weights = rmap.eta_for(nl.ids) if weighted else None
    labels = _prefix_vote(
        train.labels[nl.indices], k_used, train.num_classes, weights
    )
    return Prediction(
        labels,
        k_used,
        clamped,
        nl.ids if keep_evidence else None,
        nl.sq_distances if keep_evidence else None,
    )


def ann_predict(
    queries: np.ndarray,
    train: LabeledDataset,
    rmap: ReliabilityMap,
    block_size: int = DEFAULT_BLOCK_SIZE,
    keep_evidence: bool = False,
) -> Prediction:
    """Adaptive k-NN: inherited neighborhood size, unweighted vote."""
    return _adaptive_predict(queries, train, rmap, False, block_size, keep_evidence)


def wann_predict(
    queries: np.ndarray,
    train: LabeledDataset,
    rmap: ReliabilityMap,
    block_size: int = DEFAULT_BLOCK_SIZE,
    keep_evidence: bool = False,
) -> Prediction:
    """Adaptive k-NN with reliability-weighted votes."""
    return _adaptive_predict(queries, train, rmap, True, block_size, keep_evidence)


def prediction_rows(pred: Prediction) -> list[tuple[int, int, int]]:
    """(query_index, label, k_used) triples for CSV output."""
    return [
        (i, int(lab), int(k))
        for i, (lab, k) in enumerate(zip(pred.labels, pred.k_used))
    ]
