"""Reliability-weighted adaptive nearest-neighbor classification.

Training-free classification over precomputed embeddings that tolerates
label noise: per-sample reliability scores from leave-one-out ladder
votes, adaptive neighborhood sizes inherited from the nearest training
sample, reliability-weighted voting, and a reliability-filtered variant
of Fisher LDA, plus generators, containers, and a seeded experiment
harness around them.
"""

from .classify import (
    Prediction,
    adaptive_neighborhood_size,
    ann_predict,
    fixed_knn_predict,
    wann_predict,
)
from .dimred import (
    Projection,
    fit_flda,
    fit_lda,
    fit_pca,
    load_projection,
    project,
    save_projection,
)
from .exceptions import (
    CapacityError,
    CorruptionError,
    FormatError,
    ValidationError,
    WannError,
)
from .experiment import (
    ExperimentConfig,
    RunRecord,
    SubsampleSpec,
    evaluate_accuracy,
    run_experiment,
    write_report,
)
from .neighbors import NeighborList, majority_vote, nearest_neighbors, pairwise_sq_distances
from .noise import FlipMap, NoiseSpec, apply_noise, builtin_flip_map
from .reliability import (
    ReliabilityConfig,
    ReliabilityMap,
    compute_reliability_map,
    filter_unreliable,
)
from .store import (
    LabeledDataset,
    SyntheticSpec,
    generate_synthetic_mixture,
    l2_normalize,
    load_dataset,
    long_tail_subsample,
    save_dataset,
    standardize,
    stratified_subsample,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CorruptionError",
    "ExperimentConfig",
    "FlipMap",
    "FormatError",
    "LabeledDataset",
    "NeighborList",
    "NoiseSpec",
    "Prediction",
    "Projection",
    "ReliabilityConfig",
    "ReliabilityMap",
    "RunRecord",
    "SubsampleSpec",
    "SyntheticSpec",
    "ValidationError",
    "WannError",
    "adaptive_neighborhood_size",
    "ann_predict",
    "apply_noise",
    "builtin_flip_map",
    "compute_reliability_map",
    "evaluate_accuracy",
    "filter_unreliable",
    "fit_flda",
    "fit_lda",
    "fit_pca",
    "fixed_knn_predict",
    "generate_synthetic_mixture",
    "l2_normalize",
    "load_dataset",
    "load_projection",
    "long_tail_subsample",
    "majority_vote",
    "nearest_neighbors",
    "pairwise_sq_distances",
    "project",
    "run_experiment",
    "save_dataset",
    "save_projection",
    "standardize",
    "stratified_subsample",
    "wann_predict",
    "write_report",
]
