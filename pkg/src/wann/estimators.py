"""Estimator-style wrappers over the functional core.

These follow the fit/predict/transform conventions (parameters stored
verbatim at construction, fitted state in trailing-underscore attributes,
input checks at call time) so the classifiers and reducers drop into
pipelines and grid searches.  Labels may be arbitrary values; they are
encoded to class indices internally and decoded on the way out.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classify import ann_predict, fixed_knn_predict, wann_predict
from .dimred import fit_flda, fit_lda, fit_pca, project
from .reliability import ReliabilityConfig, compute_reliability_map
from .store import LabeledDataset


def _dataset_from_xy(X: np.ndarray, y_idx: np.ndarray, n_classes: int) -> LabeledDataset:
    return LabeledDataset(
        X, y_idx, np.arange(X.shape[0], dtype=np.uint64), n_classes
    )


class FixedKNeighborsClassifier(ClassifierMixin, BaseEstimator):
    """Plain majority-vote k-NN with deterministic tie handling.

    Parameters
    ----------
    n_neighbors : int, default=11
        Neighborhood size; clamped to the training size at predict time.
    """

    def __init__(self, n_neighbors: int = 11):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.train_ = _dataset_from_xy(X, y_idx, len(self.classes_))
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "train_")
        X = check_array(X)
        pred = fixed_knn_predict(X, self.train_, self.n_neighbors)
        return self.classes_[pred.labels]


class AdaptiveKNeighborsClassifier(ClassifierMixin, BaseEstimator):
    """Nearest-neighbor classifier with per-query neighborhood sizes.

    Each training sample earns a reliability weight and a neighborhood
    size from a leave-one-out ladder scan at fit time; a query inherits
    the size of its nearest training sample.  With ``weighted=True``
    neighbors vote with their reliability weights, otherwise votes are
    uniform over the inherited neighborhood.

    Parameters
    ----------
    k_min, k_max : int, defaults 11 and 51
        Odd endpoints of the neighborhood ladder.
    weighted : bool, default=True
        Reliability-weighted voting versus plain counting.
    """

    def __init__(self, k_min: int = 11, k_max: int = 51, weighted: bool = True):
        self.k_min = k_min
        self.k_max = k_max
        self.weighted = weighted

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.train_ = _dataset_from_xy(X, y_idx, len(self.classes_))
        config = ReliabilityConfig(self.k_min, self.k_max)
        self.reliability_map_ = compute_reliability_map(self.train_, config)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "reliability_map_")
        X = check_array(X)
        predictor = wann_predict if self.weighted else ann_predict
        pred = predictor(X, self.train_, self.reliability_map_)
        return self.classes_[pred.labels]

    def reliability_weights(self):
        """Per-training-sample weights, aligned with the rows passed to fit."""
        check_is_fitted(self, "reliability_map_")
        return self.reliability_map_.eta_for(self.train_.ids)


class PCATransformer(TransformerMixin, BaseEstimator):
    """Principal-component projection with sign-stable axes."""

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X)
        labels = np.zeros(X.shape[0], dtype=np.int64)
        ds = _dataset_from_xy(X, labels, 1)
        self.projection_ = fit_pca(ds, self.n_components)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = check_array(X)
        ds = _dataset_from_xy(
            X, np.zeros(X.shape[0], dtype=np.int64), 1
        )
        return project(ds, self.projection_).embeddings.astype(np.float64)


class LDATransformer(TransformerMixin, BaseEstimator):
    """Fisher discriminant projection onto up to C-1 axes."""

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        ds = _dataset_from_xy(X, y_idx, len(self.classes_))
        self.projection_ = fit_lda(ds)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = check_array(X)
        ds = _dataset_from_xy(X, np.zeros(X.shape[0], dtype=np.int64), 1)
        return project(ds, self.projection_).embeddings.astype(np.float64)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)


class FilteredLDATransformer(TransformerMixin, BaseEstimator):
    """Fisher projection fitted only on reliably-labeled samples.

    A leave-one-out reliability scan runs on the training data first;
    samples stuck at the 1/k_max floor are excluded from the scatter
    matrices.  The projection still transforms every row.

    Parameters
    ----------
    k_min, k_max : int, defaults 11 and 51
        Odd endpoints of the reliability ladder.
    """

    def __init__(self, k_min: int = 11, k_max: int = 51):
        self.k_min = k_min
        self.k_max = k_max

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        ds = _dataset_from_xy(X, y_idx, len(self.classes_))
        config = ReliabilityConfig(self.k_min, self.k_max)
        rmap = compute_reliability_map(ds, config)
        self.projection_ = fit_flda(ds, rmap)
        self.kept_sample_count_ = self.projection_.fit_sample_count
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = check_array(X)
        ds = _dataset_from_xy(X, np.zeros(X.shape[0], dtype=np.int64), 1)
        return project(ds, self.projection_).embeddings.astype(np.float64)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
