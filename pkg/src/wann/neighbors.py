"""Exact nearest-neighbor search and majority voting.

Distances are squared Euclidean, accumulated in float64 via the
``|a|^2 + |b|^2 - 2 a.b`` expansion, one query block at a time.  Selection
is exact top-k under the ordering (distance ascending, id ascending), so
results do not depend on how the support rows happen to be laid out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CapacityError, ValidationError

DEFAULT_BLOCK_SIZE = 256


def pairwise_sq_distances(
    queries: np.ndarray, support: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE
) -> np.ndarray:
    """Squared Euclidean distance matrix, shape (n_queries, n_support)."""
    q = np.asarray(queries, dtype=np.float64)
    s = np.asarray(support, dtype=np.float64)
    if q.ndim != 2 or s.ndim != 2 or q.shape[1] != s.shape[1]:
        raise ValidationError("queries and support must be 2-D with equal width")
    s_sq = np.einsum("ij,ij->i", s, s)
    out = np.empty((q.shape[0], s.shape[0]), dtype=np.float64)
    for lo in range(0, q.shape[0], block_size):
        hi = min(lo + block_size, q.shape[0])
        qb = q[lo:hi]
        q_sq = np.einsum("ij,ij->i", qb, qb)
        block = q_sq[:, None] + s_sq[None, :] - 2.0 * (qb @ s.T)
        np.maximum(block, 0.0, out=block)  # expansion can dip below zero
        out[lo:hi] = block
    return out


@dataclass(frozen=True)
class NeighborList:
    """Top-k neighbors for a batch of queries, nearest first.

    Attributes
    ----------
    indices : int64 array (n_queries, k), row positions into the support set
    ids : uint64 array (n_queries, k)
    sq_distances : float64 array (n_queries, k)
    """

    indices: np.ndarray
    ids: np.ndarray
    sq_distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return np.sqrt(self.sq_distances)


def nearest_neighbors(
    queries: np.ndarray,
    support: np.ndarray,
    support_ids: np.ndarray,
    k: int,
    exclude_ids: np.ndarray | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> NeighborList:
    """Exact k nearest support rows per query.

    Ordering is (squared distance ascending, support id ascending); the id
    key makes every tie deterministic.  ``exclude_ids`` optionally names one
    support id per query to leave out, which is how a sample is held out of
    its own neighborhood.

    Raises
    ------
    CapacityError
        Fewer than ``k`` support rows remain after exclusion.
    """
    q = np.asarray(queries, dtype=np.float64)
    s = np.asarray(support, dtype=np.float64)
    sids = np.asarray(support_ids, dtype=np.uint64)
    if q.ndim != 2 or s.ndim != 2 or q.shape[1] != s.shape[1]:
        raise ValidationError("queries and support must be 2-D with equal width")
    if sids.shape != (s.shape[0],):
        raise ValidationError("support_ids must have one entry per support row")
    if k < 1:
        raise ValidationError("k must be >= 1")
    n_q, n_s = q.shape[0], s.shape[0]
    if exclude_ids is not None:
        exclude_ids = np.asarray(exclude_ids, dtype=np.uint64)
        if exclude_ids.shape != (n_q,):
            raise ValidationError("exclude_ids must have one entry per query")

    indices = np.empty((n_q, k), dtype=np.int64)
    out_ids = np.empty((n_q, k), dtype=np.uint64)
    out_d = np.empty((n_q, k), dtype=np.float64)

    s_sq = np.einsum("ij,ij->i", s, s)
    for lo in range(0, n_q, block_size):
        hi = min(lo + block_size, n_q)
        qb = q[lo:hi]
        q_sq = np.einsum("ij,ij->i", qb, qb)
        dist = q_sq[:, None] + s_sq[None, :] - 2.0 * (qb @ s.T)
        np.maximum(dist, 0.0, out=dist)
        for r in range(hi - lo):
            row = dist[r]
            if exclude_ids is not None:
                dropped = np.nonzero(sids == exclude_ids[lo + r])[0]
                if dropped.size:
                    row = row.copy()
                    row[dropped] = np.inf
                available = n_s - dropped.size
            else:
                available = n_s
            if k > available:
                raise CapacityError(
                    f"query {lo + r}: asked for {k} neighbors, "
                    f"only {available} support rows available"
                )
            kth = np.partition(row, k - 1)[k - 1]
            cand = np.nonzero(row <= kth)[0]
            order = np.lexsort((sids[cand], row[cand]))
            chosen = cand[order[:k]]
            indices[lo + r] = chosen
            out_ids[lo + r] = sids[chosen]
            out_d[lo + r] = row[chosen]
    return NeighborList(indices, out_ids, out_d)


@dataclass(frozen=True)
class VoteResult:
    """Outcome of one (possibly weighted) neighborhood vote."""

    label: int
    tallies: np.ndarray


def majority_vote(
    labels: np.ndarray, num_classes: int, weights: np.ndarray | None = None
) -> VoteResult:
    """Plurality vote over ``labels``; ties go to the smallest class index."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.size == 0:
        raise ValidationError("labels must be a non-empty 1-D array")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValidationError("vote labels out of class range")
    if weights is None:
        tallies = np.bincount(labels, minlength=num_classes).astype(np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != labels.shape:
            raise ValidationError("weights must match labels in shape")
        if np.any(weights < 0):
            raise ValidationError("vote weights must be non-negative")
        tallies = np.bincount(labels, weights=weights, minlength=num_classes)
    return VoteResult(int(np.argmax(tallies)), tallies)


def vote_matrix(
    neighbor_labels: np.ndarray, num_classes: int, weights: np.ndarray | None = None
) -> np.ndarray:
    """Batched plurality vote: one winning label per row of ``neighbor_labels``."""
    lab = np.asarray(neighbor_labels, dtype=np.int64)
    if lab.ndim != 2:
        raise ValidationError("neighbor_labels must be 2-D")
    n, k = lab.shape
    tallies = np.zeros((n, num_classes), dtype=np.float64)
    rows = np.repeat(np.arange(n), k)
    w = np.ones(n * k) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    np.add.at(tallies, (rows, lab.ravel()), w)
    return np.argmax(tallies, axis=1).astype(np.int64)
