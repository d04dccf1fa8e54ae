"""Label-noise injection: symmetric, class-conditional, and feature-conditional.

All randomness flows through the dedicated "noise" Philox stream, so a
(seed, spec) pair always produces the same corrupted labels regardless of
what else has been drawn in the process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.stats import truncnorm

from .exceptions import ValidationError
from .rng import stream_rng
from .store import LabeledDataset

NOISE_KINDS = ("symmetric", "asymmetric", "instance")

# label index binding used by the built-in class-conditional maps
CIFAR10_CLASSES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)

# truck->automobile, bird->airplane, deer->horse, cat<->dog
_CIFAR10_FLIPS = {9: 1, 2: 0, 4: 7, 3: 5, 5: 3}
# 7->1, 2->7, 5<->6, 3->8
_MNIST_FLIPS = {7: 1, 2: 7, 5: 6, 6: 5, 3: 8}


@dataclass(frozen=True)
class FlipMap:
    """Class-conditional flip targets: source class -> destination class."""

    mapping: dict[int, int]

    def __post_init__(self) -> None:
        if not self.mapping:
            raise ValidationError("flip map must name at least one source class")
        for src, dst in self.mapping.items():
            if src == dst:
                raise ValidationError(f"flip map sends class {src} to itself")
            if src < 0 or dst < 0:
                raise ValidationError("flip map classes must be non-negative")

    def validate_for(self, num_classes: int) -> None:
        for src, dst in self.mapping.items():
            if src >= num_classes or dst >= num_classes:
                raise ValidationError(
                    f"flip {src}->{dst} falls outside [0, {num_classes})"
                )

    def sources(self) -> np.ndarray:
        return np.array(sorted(self.mapping), dtype=np.int64)


def circular_flip_map(num_classes: int) -> FlipMap:
    """Every class flips to its successor, the last wraps to 0."""
    if num_classes < 2:
        raise ValidationError("circular map needs >= 2 classes")
    return FlipMap({c: (c + 1) % num_classes for c in range(num_classes)})


def _cifar100_flip_map() -> FlipMap:
    """Circular shift within each 5-class superclass group."""
    table = json.loads(
        resources.files("wann.configs")
        .joinpath("cifar100_superclasses.json")
        .read_text()
    )
    mapping: dict[int, int] = {}
    for fine in table.values():
        ordered = sorted(fine)
        for a, b in zip(ordered, ordered[1:] + ordered[:1]):
            mapping[a] = b
    return FlipMap(mapping)


def builtin_flip_map(name: str, num_classes: int | None = None) -> FlipMap:
    """Named class-conditional maps: mnist, cifar10, cifar100, circular."""
    if name == "mnist":
        return FlipMap(dict(_MNIST_FLIPS))
    if name == "cifar10":
        return FlipMap(dict(_CIFAR10_FLIPS))
    if name == "cifar100":
        return _cifar100_flip_map()
    if name == "circular":
        if num_classes is None:
            raise ValidationError("circular map needs num_classes")
        return circular_flip_map(num_classes)
    raise KeyError(f"unknown flip map {name!r}; "
                   f"choose from mnist, cifar10, cifar100, circular")


@dataclass(frozen=True)
class NoiseSpec:
    """What kind of corruption to apply, at what rate, with what seed."""

    kind: str
    rate: float
    seed: int = 0
    flip_map: FlipMap | None = None

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValidationError(
                f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}"
            )
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError("noise rate must lie in [0, 1]")
        if self.kind == "asymmetric" and self.flip_map is None:
            raise ValidationError("asymmetric noise needs a flip map")
        if self.kind != "asymmetric" and self.flip_map is not None:
            raise ValidationError(f"{self.kind} noise takes no flip map")


@dataclass(frozen=True)
class NoiseOutcome:
    """Corrupted labels plus bookkeeping about what actually changed."""

    labels: np.ndarray
    flipped: np.ndarray  # bool mask, True where the label changed
    realized_rate: float

    @property
    def n_changed(self) -> int:
        return int(np.count_nonzero(self.flipped))


def _finish(old_labels: np.ndarray, new_labels: np.ndarray) -> NoiseOutcome:
    new_labels = np.asarray(new_labels, dtype=np.int64)
    flipped = new_labels != old_labels
    rate = float(np.count_nonzero(flipped)) / old_labels.size if old_labels.size else 0.0
    new_labels.flags.writeable = False
    flipped.flags.writeable = False
    return NoiseOutcome(new_labels, flipped, rate)


def inject_symmetric(
    labels: np.ndarray, num_classes: int, rate: float, rng: np.random.Generator
) -> NoiseOutcome:
    """Each label flips with probability ``rate``, uniformly to another class.

    The replacement is drawn from the remaining ``num_classes - 1`` labels,
    never the original, so the realized flip fraction is an unbiased
    estimate of ``rate`` itself.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes < 2:
        raise ValidationError("symmetric noise needs >= 2 classes")
    flip = rng.random(labels.size) < rate
    # uniform over the other classes: draw in [0, C-1) and step over self
    draw = rng.integers(0, num_classes - 1, size=labels.size)
    replacement = draw + (draw >= labels)
    return _finish(labels, np.where(flip, replacement, labels))


def inject_asymmetric(
    labels: np.ndarray,
    num_classes: int,
    rate: float,
    flip_map: FlipMap,
    rng: np.random.Generator,
) -> NoiseOutcome:
    """Samples of mapped source classes flip to their fixed target with
    probability ``rate``; all other classes are left alone."""
    labels = np.asarray(labels, dtype=np.int64)
    flip_map.validate_for(num_classes)
    targets = np.arange(num_classes, dtype=np.int64)
    for src, dst in flip_map.mapping.items():
        targets[src] = dst
    eligible = targets[labels] != labels
    flip = eligible & (rng.random(labels.size) < rate)
    return _finish(labels, np.where(flip, targets[labels], labels))


def instance_flip_profile(
    embeddings: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    rate: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample flip budgets and flip-target distributions.

    Budgets q_i come from a normal with mean ``rate`` and scale 0.1,
    truncated to [0, 1].  Targets come from one global random linear
    scoring of the embedding: logits x . W with the true class masked out,
    softmaxed.  Returns (q, base) where base[i] is a distribution over the
    other classes with base[i, labels[i]] = 0; rows with identical features
    and labels get identical base rows.
    """
    labels = np.asarray(labels, dtype=np.int64)
    x = np.asarray(embeddings, dtype=np.float64)
    if num_classes < 2:
        raise ValidationError("instance noise needs >= 2 classes")
    if x.ndim != 2 or x.shape[0] != labels.size:
        raise ValidationError("embeddings and labels disagree on sample count")
    n, d = x.shape
    a, b = (0.0 - rate) / 0.1, (1.0 - rate) / 0.1
    q = truncnorm.rvs(a, b, loc=rate, scale=0.1, size=n, random_state=rng)
    q = np.atleast_1d(q)
    w = rng.standard_normal((d, num_classes))
    logits = x @ w
    logits[np.arange(n), labels] = -np.inf
    logits -= logits.max(axis=1, keepdims=True)
    base = np.exp(logits)
    base /= base.sum(axis=1, keepdims=True)
    return q, base


def inject_instance(
    embeddings: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    rate: float,
    rng: np.random.Generator,
) -> NoiseOutcome:
    """Feature-conditional noise.

    Each sample flips with its own budget q_i; the replacement follows the
    flip-target distribution from :func:`instance_flip_profile`, so the
    true class keeps mass 1 - q_i.  ``rate=0`` is an exact no-op (the
    truncated normal would otherwise still put mass above zero).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if rate == 0.0:
        return _finish(labels, labels.copy())
    q, base = instance_flip_profile(embeddings, labels, num_classes, rate, rng)
    n = labels.size
    p = base * q[:, None]
    p[np.arange(n), labels] = 1.0 - q
    # per-row categorical draw via inverse CDF
    u = rng.random(n)
    cdf = np.cumsum(p, axis=1)
    cdf[:, -1] = 1.0  # guard against rounding shortfall
    new_labels = (u[:, None] > cdf).sum(axis=1)
    return _finish(labels, new_labels)


def apply_noise(
    dataset: LabeledDataset, spec: NoiseSpec, seed: int | None = None
) -> tuple[LabeledDataset, NoiseOutcome]:
    """Corrupt a dataset's labels per ``spec``.

    ``seed`` overrides ``spec.seed`` when given, which is how a multi-seed
    experiment reuses one spec.
    """
    use_seed = spec.seed if seed is None else seed
    rng = stream_rng(use_seed, "noise")
    if spec.kind == "symmetric":
        out = inject_symmetric(dataset.labels, dataset.num_classes, spec.rate, rng)
    elif spec.kind == "asymmetric":
        out = inject_asymmetric(
            dataset.labels, dataset.num_classes, spec.rate, spec.flip_map, rng
        )
    else:
        out = inject_instance(
            dataset.embeddings, dataset.labels, dataset.num_classes, spec.rate, rng
        )
    return dataset.with_labels(out.labels), out
