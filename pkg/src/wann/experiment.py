"""Seeded experiment harness and report writer.

One run per seed walks a fixed pipeline: subsample, corrupt training
labels, optionally standardize, optionally reduce dimensionality, predict,
score.  Filtered LDA is the one stage with a two-phase reliability
contract: the filter consumes weights computed in the input space, and the
projected space gets a fresh map before any weighted prediction.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .classify import ann_predict, fixed_knn_predict, wann_predict
from .dimred import fit_flda, fit_lda, fit_pca, project
from .exceptions import ValidationError, WannError
from .noise import FlipMap, NoiseSpec, apply_noise, builtin_flip_map
from .reliability import ReliabilityConfig, compute_reliability_map
from .store import (
    LabeledDataset,
    l2_normalize,
    load_dataset,
    long_tail_subsample,
    standardize,
    stratified_subsample,
)

METHODS = ("knn", "ann", "wann")
REDUCTIONS = ("none", "pca", "lda", "flda")

_PARAM_RE = re.compile(r"^([a-z]+)\((\d+)\)$")


def parse_method(text: str) -> tuple[str, int | None]:
    """"wann" -> ("wann", None); "knn(17)" -> ("knn", 17); "knn" -> ("knn", 11)."""
    m = _PARAM_RE.match(text)
    name, arg = (m.group(1), int(m.group(2))) if m else (text, None)
    if name not in METHODS:
        raise ValidationError(f"unknown method {text!r}; expected one of {METHODS}")
    if name == "knn":
        k = 11 if arg is None else arg
        if k < 1:
            raise ValidationError("knn needs k >= 1")
        return "knn", k
    if arg is not None:
        raise ValidationError(f"method {name} takes no parameter")
    return name, None


def parse_reduction(text: str) -> tuple[str, int | None]:
    """"none"/"lda"/"flda" -> (name, None); "pca(50)" -> ("pca", 50)."""
    m = _PARAM_RE.match(text)
    name, arg = (m.group(1), int(m.group(2))) if m else (text, None)
    if name not in REDUCTIONS:
        raise ValidationError(
            f"unknown reduction {text!r}; expected one of {REDUCTIONS}"
        )
    if name == "pca":
        if arg is None or arg < 1:
            raise ValidationError("pca needs a component count, e.g. pca(50)")
        return "pca", arg
    if arg is not None:
        raise ValidationError(f"reduction {name} takes no parameter")
    return name, None


@dataclass(frozen=True)
class SubsampleSpec:
    """Optional training-set thinning before noise injection."""

    kind: str  # "stratified" | "longtail"
    per_class: int | None = None
    imbalance_ratio: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "stratified":
            if self.per_class is None or self.per_class < 1:
                raise ValidationError("stratified subsample needs per_class >= 1")
        elif self.kind == "longtail":
            if self.imbalance_ratio is None or not 0 < self.imbalance_ratio <= 1:
                raise ValidationError(
                    "longtail subsample needs imbalance_ratio in (0, 1]"
                )
        else:
            raise ValidationError(
                f"subsample kind must be stratified or longtail, got {self.kind!r}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment grid cell."""

    train_path: str
    test_path: str
    method: str = "wann"
    reduction: str = "none"
    noise: NoiseSpec | None = None
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    subsample: SubsampleSpec | None = None
    seeds: tuple[int, ...] = (0,)
    standardize: bool = False
    l2_normalize: bool = False
    output_path: str | None = None

    def __post_init__(self) -> None:
        parse_method(self.method)
        parse_reduction(self.reduction)
        if not self.seeds:
            raise ValidationError("seeds must be non-empty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


@dataclass(frozen=True)
class RunRecord:
    """One (config, seed) outcome."""

    method: str
    noise: str
    rate: float
    reduction: str
    seed: int
    accuracy: float
    realized_rate: float
    wall_ms: float
    mean_k_used: float


def evaluate_accuracy(predictions: np.ndarray, true_labels: np.ndarray) -> float:
    """Exact fraction of matching labels."""
    pred = np.asarray(predictions)
    true = np.asarray(true_labels)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValidationError("predictions and labels must be 1-D and equal length")
    if pred.size == 0:
        raise ValidationError("cannot score an empty prediction set")
    return float(np.count_nonzero(pred == true)) / pred.size


def _subsample(
    train: LabeledDataset, spec: SubsampleSpec | None, seed: int
) -> LabeledDataset:
    if spec is None:
        return train
    if spec.kind == "stratified":
        return stratified_subsample(train, spec.per_class, seed)
    return long_tail_subsample(train, spec.imbalance_ratio, seed)


def _run_one_seed(
    config: ExperimentConfig,
    train_full: LabeledDataset,
    test_full: LabeledDataset,
    seed: int,
) -> RunRecord:
    started = time.perf_counter()
    train = _subsample(train_full, config.subsample, seed)
    test = test_full

    realized = 0.0
    if config.noise is not None:
        train, outcome = apply_noise(train, config.noise, seed=seed)
        realized = outcome.realized_rate

    if config.standardize:
        train, [test], _ = standardize(train, [test])
    if config.l2_normalize:
        train = l2_normalize(train)
        test = l2_normalize(test)

    red_name, red_arg = parse_reduction(config.reduction)
    if red_name == "pca":
        proj = fit_pca(train, red_arg)
        train, test = project(train, proj), project(test, proj)
    elif red_name == "lda":
        proj = fit_lda(train)
        train, test = project(train, proj), project(test, proj)
    elif red_name == "flda":
        # the filter runs on input-space weights; the projected space gets
        # a fresh map below if the method votes with reliability
        input_space_map = compute_reliability_map(train, config.reliability)
        proj = fit_flda(train, input_space_map)
        train, test = project(train, proj), project(test, proj)

    method_name, method_k = parse_method(config.method)
    if method_name == "knn":
        pred = fixed_knn_predict(test.embeddings, train, method_k)
    else:
        rmap = compute_reliability_map(train, config.reliability)
        predictor = ann_predict if method_name == "ann" else wann_predict
        pred = predictor(test.embeddings, train, rmap)

    accuracy = evaluate_accuracy(pred.labels, test.labels)
    wall_ms = (time.perf_counter() - started) * 1000.0
    return RunRecord(
        method=config.method,
        noise=config.noise.kind if config.noise else "none",
        rate=config.noise.rate if config.noise else 0.0,
        reduction=config.reduction,
        seed=seed,
        accuracy=accuracy,
        realized_rate=realized,
        wall_ms=wall_ms,
        mean_k_used=float(pred.k_used.mean()),
    )


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Execute every seed of ``config``; deterministic apart from wall time."""
    train_full = load_dataset(config.train_path)
    test_full = load_dataset(config.test_path)
    records = []
    for seed in config.seeds:
        try:
            records.append(_run_one_seed(config, train_full, test_full, seed))
        except (WannError, KeyError) as exc:
            context = (
                f"experiment method={config.method} "
                f"reduction={config.reduction} seed={seed}"
            )
            raise type(exc)(f"[{context}] {exc}") from exc
    if config.output_path is not None:
        fmt = "jsonl" if config.output_path.endswith(".jsonl") else "csv"
        write_report(records, config.output_path, fmt)
    return records


# ---------------------------------------------------------------------------
# Reports

REPORT_COLUMNS = (
    "method", "noise", "rate", "reduction", "seed",
    "accuracy", "realized_rate", "wall_ms",
)
SUMMARY_COLUMNS = (
    "method", "noise", "rate", "reduction",
    "n_seeds", "accuracy_mean", "accuracy_std",
)
_EXTERNAL_NOTE = "significance tests: compute externally"


def _group_key(rec: RunRecord) -> tuple:
    return (rec.method, rec.noise, rec.rate, rec.reduction)


def summarize(records: Iterable[RunRecord]) -> list[dict]:
    """Per-group mean and sample standard deviation, lexicographic order."""
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        groups.setdefault(_group_key(rec), []).append(rec.accuracy)
    out = []
    for key in sorted(groups):
        accs = groups[key]
        mean = float(np.mean(accs))
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        out.append(
            {
                "method": key[0],
                "noise": key[1],
                "rate": key[2],
                "reduction": key[3],
                "n_seeds": len(accs),
                "accuracy_mean": mean,
                "accuracy_std": std,
            }
        )
    return out


def write_report(
    records: list[RunRecord], path: str | Path, format: str = "csv"
) -> None:
    """Emit run rows plus a per-group summary block.

    CSV keeps the stable column order and appends the summary as commented
    header plus plain rows after a ``# summary`` marker; JSONL emits one
    object per run and one ``{"summary": ...}`` object per group.
    """
    if format not in ("csv", "jsonl"):
        raise ValidationError(f"report format must be csv or jsonl, got {format!r}")
    summaries = summarize(records)
    lines = []
    if format == "csv":
        lines.append(",".join(REPORT_COLUMNS))
        for rec in records:
            lines.append(
                f"{rec.method},{rec.noise},{rec.rate!r},{rec.reduction},"
                f"{rec.seed},{rec.accuracy!r},{rec.realized_rate!r},"
                f"{rec.wall_ms:.3f}"
            )
        if records:
            lines.append("# summary")
            lines.append("# " + ",".join(SUMMARY_COLUMNS))
            for s in summaries:
                lines.append(
                    f"{s['method']},{s['noise']},{s['rate']!r},{s['reduction']},"
                    f"{s['n_seeds']},{s['accuracy_mean']!r},{s['accuracy_std']!r}"
                )
            lines.append(f"# {_EXTERNAL_NOTE}")
    else:
        for rec in records:
            lines.append(json.dumps(rec.__dict__, sort_keys=True))
        for s in summaries:
            lines.append(json.dumps({"summary": s}, sort_keys=True))
        if records:
            lines.append(json.dumps({"note": _EXTERNAL_NOTE}))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Config (de)serialization


def _noise_to_json(spec: NoiseSpec) -> dict:
    out = {"kind": spec.kind, "rate": spec.rate, "seed": spec.seed}
    if spec.flip_map is not None:
        out["flip_map"] = {str(k): v for k, v in spec.flip_map.mapping.items()}
    return out


def _noise_from_json(payload: dict, num_classes_hint: int | None = None) -> NoiseSpec:
    flip = payload.get("flip_map")
    flip_map = None
    if isinstance(flip, str):
        flip_map = builtin_flip_map(flip, num_classes_hint)
    elif isinstance(flip, dict):
        flip_map = FlipMap({int(k): int(v) for k, v in flip.items()})
    return NoiseSpec(
        kind=payload["kind"],
        rate=float(payload["rate"]),
        seed=int(payload.get("seed", 0)),
        flip_map=flip_map,
    )


def config_to_json(config: ExperimentConfig) -> dict:
    out = {
        "train_path": config.train_path,
        "test_path": config.test_path,
        "method": config.method,
        "reduction": config.reduction,
        "reliability": {
            "k_min": config.reliability.k_min,
            "k_max": config.reliability.k_max,
        },
        "seeds": list(config.seeds),
        "standardize": config.standardize,
        "l2_normalize": config.l2_normalize,
    }
    if config.noise is not None:
        out["noise"] = _noise_to_json(config.noise)
    if config.subsample is not None:
        sub = {"kind": config.subsample.kind}
        if config.subsample.per_class is not None:
            sub["per_class"] = config.subsample.per_class
        if config.subsample.imbalance_ratio is not None:
            sub["imbalance_ratio"] = config.subsample.imbalance_ratio
        out["subsample"] = sub
    if config.output_path is not None:
        out["output_path"] = config.output_path
    return out


def config_from_json(payload: dict) -> ExperimentConfig:
    try:
        rel = payload.get("reliability", {})
        sub = payload.get("subsample")
        return ExperimentConfig(
            train_path=payload["train_path"],
            test_path=payload["test_path"],
            method=payload.get("method", "wann"),
            reduction=payload.get("reduction", "none"),
            noise=_noise_from_json(payload["noise"]) if "noise" in payload else None,
            reliability=ReliabilityConfig(
                k_min=int(rel.get("k_min", 11)), k_max=int(rel.get("k_max", 51))
            ),
            subsample=SubsampleSpec(
                kind=sub["kind"],
                per_class=sub.get("per_class"),
                imbalance_ratio=sub.get("imbalance_ratio"),
            )
            if sub
            else None,
            seeds=tuple(payload.get("seeds", [0])),
            standardize=bool(payload.get("standardize", False)),
            l2_normalize=bool(payload.get("l2_normalize", False)),
            output_path=payload.get("output_path"),
        )
    except KeyError as exc:
        raise ValidationError(f"experiment config missing field {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    return config_from_json(json.loads(Path(path).read_text()))
