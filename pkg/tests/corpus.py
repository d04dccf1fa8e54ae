"""Random-corpus builder shared across the test suite."""

import numpy as np

from wann.store import LabeledDataset


def random_dataset(rng, n, d, num_classes, grid=False):
    """Random corpus; ``grid=True`` snaps embeddings to a small integer grid
    so squared distances are exact in float64 and ties are plentiful."""
    if grid:
        emb = rng.integers(0, 8, size=(n, d)).astype(np.float32)
    else:
        emb = rng.normal(size=(n, d)).astype(np.float32)
    labels = rng.integers(0, num_classes, size=n)
    labels[:num_classes] = np.arange(num_classes)  # every class present
    ids = rng.permutation(n * 3)[:n].astype(np.uint64)
    return LabeledDataset(emb, labels, ids, num_classes)
