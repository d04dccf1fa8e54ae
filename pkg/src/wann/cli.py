"""Command-line entry points.

Subcommands cover the full pipeline: container inspection (``ingest``),
corpus generation (``synth``), label corruption (``noise``), reliability
scoring (``reliability``), classification (``classify``), projection
fitting (``dimred``), raw neighbor dumps (``neighbors``), and the seeded
harness (``experiment``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment as exp
from .classify import ann_predict, fixed_knn_predict, prediction_rows, wann_predict
from .dimred import (
    fit_flda,
    fit_lda,
    fit_pca,
    project,
    save_projection,
    save_projection_json,
)
from .exceptions import WannError
from .neighbors import nearest_neighbors
from .noise import FlipMap, NoiseSpec, apply_noise, builtin_flip_map
from .reliability import ReliabilityConfig, compute_reliability_map
from .store import (
    SyntheticSpec,
    generate_synthetic_mixture,
    l2_normalize,
    load_dataset,
    read_sidecar,
    save_dataset,
    split_train_test,
    standardize,
    write_sidecar,
)

BUILTIN_MAPS = ("mnist", "cifar10", "cifar100", "circular")


def _add_ladder_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kmin", type=int, default=11,
                        help="smallest neighborhood rung (default 11)")
    parser.add_argument("--kmax", type=int, default=51,
                        help="largest neighborhood rung (default 51)")


def _add_preprocess_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--standardize", action="store_true",
                        help="zero-mean/unit-variance columns from train stats")
    parser.add_argument("--l2-normalize", action="store_true",
                        help="scale every embedding to unit length")


def _preprocess(train, queries, args):
    if args.standardize:
        train, [queries], _ = standardize(train, [queries])
    if args.l2_normalize:
        train, queries = l2_normalize(train), l2_normalize(queries)
    return train, queries


def _resolve_flip_map(text: str, num_classes: int) -> FlipMap:
    if text in BUILTIN_MAPS:
        return builtin_flip_map(text, num_classes)
    payload = json.loads(Path(text).read_text())
    return FlipMap({int(k): int(v) for k, v in payload.items()})


def _cmd_ingest(args) -> int:
    ds = load_dataset(args.file)
    counts = ",".join(str(c) for c in ds.class_counts())
    print(f"valid EVEC: n={ds.n} d={ds.d} classes={ds.num_classes}")
    print(f"class_counts={counts}")
    meta = read_sidecar(args.file)
    if meta is not None:
        print(f"sidecar={json.dumps(meta, sort_keys=True)}")
    if args.out:
        save_dataset(ds, args.out)
        print(f"re-encoded to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        d=args.d,
        num_classes=args.classes,
        samples_per_class=args.per_class,
        mean_scale=args.mean_scale,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    ds = generate_synthetic_mixture(spec)
    if args.test_per_class:
        if not args.test_out:
            raise WannError("--test-per-class needs --test-out")
        train, test = split_train_test(ds, args.test_per_class, args.seed)
        save_dataset(train, args.out)
        save_dataset(test, args.test_out)
        print(f"wrote train n={train.n} to {args.out}")
        print(f"wrote test n={test.n} to {args.test_out}")
    else:
        save_dataset(ds, args.out)
        print(f"wrote n={ds.n} d={ds.d} classes={ds.num_classes} to {args.out}")
    write_sidecar(args.out, {"generator": "synthetic-mixture", **spec.__dict__})
    return 0


def _cmd_noise(args) -> int:
    ds = load_dataset(args.input)
    flip_map = None
    if args.noise == "asymmetric":
        if not args.flip_map:
            raise WannError("asymmetric noise needs --flip-map")
        flip_map = _resolve_flip_map(args.flip_map, ds.num_classes)
    spec = NoiseSpec(args.noise, args.rate, seed=args.seed, flip_map=flip_map)
    noisy, outcome = apply_noise(ds, spec)
    save_dataset(noisy, args.out)
    print(
        f"wrote {args.out}: changed {outcome.n_changed}/{ds.n} labels "
        f"(realized_rate={outcome.realized_rate:.4f})"
    )
    return 0


def _cmd_reliability(args) -> int:
    train = load_dataset(args.train)
    if args.l2_normalize:
        train = l2_normalize(train)
    cfg = ReliabilityConfig(args.kmin, args.kmax)
    rmap = compute_reliability_map(train, cfg)
    lines = ["id,eta,k_star"]
    for sid, eta, k_star in rmap.to_rows():
        lines.append(f"{sid},{eta!r},{k_star}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    floor = sum(1 for _, e, _ in rmap.to_rows() if e <= rmap.min_eta)
    print(f"wrote {args.out}: {len(rmap)} samples, {floor} at the 1/k_max floor")
    return 0


def _cmd_classify(args) -> int:
    train = load_dataset(args.train)
    queries = load_dataset(args.queries)
    train, queries = _preprocess(train, queries, args)
    method, k = exp.parse_method(args.method)
    keep_evidence = bool(args.evidence)
    if method == "knn":
        pred = fixed_knn_predict(queries.embeddings, train, k,
                                 keep_evidence=keep_evidence)
    else:
        cfg = ReliabilityConfig(args.kmin, args.kmax)
        rmap = compute_reliability_map(train, cfg)
        predictor = ann_predict if method == "ann" else wann_predict
        pred = predictor(queries.embeddings, train, rmap,
                         keep_evidence=keep_evidence)
    lines = ["query_index,label,k_used"]
    for idx, label, k_used in prediction_rows(pred):
        lines.append(f"{idx},{label},{k_used}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    accuracy = float(np.count_nonzero(pred.labels == queries.labels)) / queries.n
    print(f"wrote {args.out}: {queries.n} predictions, accuracy={accuracy!r}")
    if args.evidence:
        Path(args.evidence).write_text(
            json.dumps(pred.evidence_records(), indent=2)
        )
        print(f"wrote evidence to {args.evidence}")
    return 0


def _cmd_dimred(args) -> int:
    train = load_dataset(args.train)
    if args.kind == "pca":
        if not args.components:
            raise WannError("pca needs --components")
        proj = fit_pca(train, args.components)
    elif args.kind == "lda":
        proj = fit_lda(train)
    else:
        cfg = ReliabilityConfig(args.kmin, args.kmax)
        rmap = compute_reliability_map(train, cfg)
        proj = fit_flda(train, rmap)
    save_projection(proj, args.out)
    flags = []
    if proj.rank_deficient:
        flags.append("rank_deficient")
    if proj.degenerate:
        flags.append("degenerate")
    suffix = f" [{','.join(flags)}]" if flags else ""
    print(f"wrote {args.out}: kind={proj.kind} p={proj.p} d={proj.d} "
          f"fit_n={proj.fit_sample_count}{suffix}")
    if args.json:
        save_projection_json(proj, args.json)
        print(f"wrote JSON to {args.json}")
    if args.apply:
        if not args.applied_out:
            raise WannError("--apply needs --applied-out")
        target = load_dataset(args.apply)
        save_dataset(project(target, proj), args.applied_out)
        print(f"projected {args.apply} -> {args.applied_out}")
    return 0


def _cmd_neighbors(args) -> int:
    support = load_dataset(args.support)
    queries = load_dataset(args.queries)
    nl = nearest_neighbors(
        queries.embeddings, support.embeddings, support.ids, args.k
    )
    lines = ["query_index,rank,neighbor_id,distance"]
    dist = nl.distances
    for i in range(queries.n):
        for r in range(nl.k):
            lines.append(f"{i},{r},{int(nl.ids[i, r])},{float(dist[i, r])!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}: {queries.n} queries x {nl.k} neighbors")
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        config = exp.load_config(args.config)
    else:
        if not (args.train and args.test):
            raise WannError("experiment needs --config or --train/--test")
        noise = None
        if args.noise != "none":
            flip_map = None
            if args.noise == "asymmetric":
                if not args.flip_map:
                    raise WannError("asymmetric noise needs --flip-map")
                num_classes = load_dataset(args.train).num_classes
                flip_map = _resolve_flip_map(args.flip_map, num_classes)
            noise = NoiseSpec(args.noise, args.rate, flip_map=flip_map)
        config = exp.ExperimentConfig(
            train_path=args.train,
            test_path=args.test,
            method=args.method,
            reduction=args.reduction,
            noise=noise,
            reliability=ReliabilityConfig(args.kmin, args.kmax),
            seeds=tuple(args.seed),
            standardize=args.standardize,
            l2_normalize=args.l2_normalize,
            output_path=args.out,
        )
    records = exp.run_experiment(config)
    if config.output_path is None and args.out:
        fmt = "jsonl" if args.out.endswith(".jsonl") else "csv"
        exp.write_report(records, args.out, fmt)
    for s in exp.summarize(records):
        print(
            f"{s['method']} noise={s['noise']}@{s['rate']} "
            f"reduction={s['reduction']}: "
            f"accuracy {s['accuracy_mean']:.4f} +/- {s['accuracy_std']:.4f} "
            f"over {s['n_seeds']} seeds"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wann",
        description="Reliability-weighted adaptive nearest-neighbor "
        "classification over embedding files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize an EVEC file")
    p.add_argument("file")
    p.add_argument("--out", help="re-encode to this path after validation")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a Gaussian-mixture corpus")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--mean-scale", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--test-per-class", type=int, default=0)
    p.add_argument("--test-out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("noise", help="corrupt labels in an EVEC file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", required=True,
                   choices=["symmetric", "asymmetric", "instance"])
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip-map",
                   help="builtin name (mnist, cifar10, cifar100, circular) "
                        "or path to a JSON {source: target} table")
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("reliability", help="score training labels")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l2-normalize", action="store_true")
    _add_ladder_flags(p)
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("classify", help="predict query labels")
    p.add_argument("--train", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--method", default="wann",
                   help="wann, ann, or knn(k) (default wann)")
    p.add_argument("--out", required=True)
    p.add_argument("--evidence", help="also dump neighbor evidence JSON here")
    _add_ladder_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("dimred", help="fit and save a projection")
    p.add_argument("--train", required=True)
    p.add_argument("--kind", required=True, choices=["pca", "lda", "flda"])
    p.add_argument("--components", type=int,
                   help="axis count for pca")
    p.add_argument("--out", required=True)
    p.add_argument("--json", help="also write the projection as JSON")
    p.add_argument("--apply", help="EVEC file to project")
    p.add_argument("--applied-out", help="where to write the projected EVEC")
    _add_ladder_flags(p)
    p.set_defaults(func=_cmd_dimred)

    p = sub.add_parser("neighbors", help="dump raw nearest neighbors")
    p.add_argument("--support", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_neighbors)

    p = sub.add_parser("experiment", help="run a seeded experiment grid cell")
    p.add_argument("--config", help="JSON config file (overrides other flags)")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--method", default="wann")
    p.add_argument("--reduction", default="none")
    p.add_argument("--noise", default="none",
                   choices=["none", "symmetric", "asymmetric", "instance"])
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--flip-map")
    p.add_argument("--seed", type=int, nargs="+", default=[0])
    p.add_argument("--out", help="report path (.csv or .jsonl)")
    _add_ladder_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WannError, KeyError, FileNotFoundError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
