import json

import numpy as np
import pytest

import wann.experiment as experiment
from wann.exceptions import ValidationError
from wann.experiment import (
    ExperimentConfig,
    RunRecord,
    SubsampleSpec,
    config_from_json,
    config_to_json,
    evaluate_accuracy,
    load_config,
    parse_method,
    parse_reduction,
    run_experiment,
    summarize,
    write_report,
)
from wann.noise import NoiseSpec
from wann.reliability import ReliabilityConfig
from wann.store import SyntheticSpec, generate_synthetic_mixture, save_dataset, split_train_test


@pytest.fixture
def corpus_paths(tmp_path):
    """Well-separated 3-class synthetic corpus split into train/test files."""
    spec = SyntheticSpec(
        d=4, num_classes=3, samples_per_class=60,
        mean_scale=20.0, noise_sigma=1.0, seed=7,
    )
    ds = generate_synthetic_mixture(spec)
    train, test = split_train_test(ds, 15, seed=1)
    train_path = tmp_path / "train.evec"
    test_path = tmp_path / "test.evec"
    save_dataset(train, train_path)
    save_dataset(test, test_path)
    return str(train_path), str(test_path)


def small_config(train_path, test_path, **kw):
    defaults = dict(
        train_path=train_path,
        test_path=test_path,
        method="wann",
        reliability=ReliabilityConfig(1, 5),
        seeds=(0,),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestParsers:
    def test_methods(self):
        assert parse_method("wann") == ("wann", None)
        assert parse_method("ann") == ("ann", None)
        assert parse_method("knn") == ("knn", 11)
        assert parse_method("knn(17)") == ("knn", 17)

    def test_method_errors(self):
        with pytest.raises(ValidationError):
            parse_method("svm")
        with pytest.raises(ValidationError):
            parse_method("wann(3)")
        with pytest.raises(ValidationError):
            parse_method("knn(0)")

    def test_reductions(self):
        assert parse_reduction("none") == ("none", None)
        assert parse_reduction("lda") == ("lda", None)
        assert parse_reduction("flda") == ("flda", None)
        assert parse_reduction("pca(30)") == ("pca", 30)

    def test_reduction_errors(self):
        with pytest.raises(ValidationError):
            parse_reduction("tsne")
        with pytest.raises(ValidationError):
            parse_reduction("pca")
        with pytest.raises(ValidationError):
            parse_reduction("lda(2)")


class TestEvaluateAccuracy:
    def test_all_correct(self):
        assert evaluate_accuracy(np.array([1, 2, 3]), np.array([1, 2, 3])) == 1.0

    def test_none_correct(self):
        assert evaluate_accuracy(np.array([1, 2]), np.array([2, 1])) == 0.0

    def test_seven_of_ten(self):
        pred = np.array([0, 0, 0, 0, 0, 0, 0, 1, 1, 1])
        true = np.zeros(10, dtype=np.int64)
        assert evaluate_accuracy(pred, true) == 0.7

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            evaluate_accuracy(np.array([1]), np.array([1, 2]))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            evaluate_accuracy(np.array([]), np.array([]))


class TestSubsampleSpec:
    def test_stratified_needs_count(self):
        with pytest.raises(ValidationError):
            SubsampleSpec("stratified")
        SubsampleSpec("stratified", per_class=5)

    def test_longtail_needs_ratio(self):
        with pytest.raises(ValidationError):
            SubsampleSpec("longtail")
        SubsampleSpec("longtail", imbalance_ratio=0.1)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            SubsampleSpec("random")


class TestRunExperiment:
    def test_clean_separated_corpus_high_accuracy(self, corpus_paths):
        cfg = small_config(*corpus_paths)
        (rec,) = run_experiment(cfg)
        assert rec.accuracy > 0.95
        assert rec.noise == "none"
        assert rec.rate == 0.0
        assert rec.realized_rate == 0.0

    def test_determinism_modulo_walltime(self, corpus_paths):
        cfg = small_config(
            *corpus_paths,
            noise=NoiseSpec("symmetric", 0.4, seed=0),
            seeds=(0, 1),
        )
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        for ra, rb in zip(a, b):
            assert ra.accuracy == rb.accuracy
            assert ra.realized_rate == rb.realized_rate
            assert ra.seed == rb.seed
            assert ra.mean_k_used == rb.mean_k_used

    def test_knn_equals_wann_on_constant_eta_corpus(self, corpus_paths):
        # clusters are wide apart, so every sample succeeds at the first
        # rung and the reliability map is constant
        wann_cfg = small_config(*corpus_paths, method="wann")
        knn_cfg = small_config(*corpus_paths, method="knn(1)")
        (wann_rec,) = run_experiment(wann_cfg)
        (knn_rec,) = run_experiment(knn_cfg)
        assert wann_rec.accuracy == knn_rec.accuracy

    def test_noise_rate_recorded(self, corpus_paths):
        cfg = small_config(
            *corpus_paths, noise=NoiseSpec("symmetric", 0.3, seed=0)
        )
        (rec,) = run_experiment(cfg)
        assert rec.noise == "symmetric"
        assert rec.rate == 0.3
        assert 0.1 < rec.realized_rate < 0.5

    def test_seed_drives_noise(self, corpus_paths):
        cfg = small_config(
            *corpus_paths,
            noise=NoiseSpec("symmetric", 0.4, seed=99),
            seeds=(0, 1, 2),
        )
        recs = run_experiment(cfg)
        assert len({r.realized_rate for r in recs}) > 1

    def test_subsample_applied(self, corpus_paths):
        cfg = small_config(
            *corpus_paths,
            subsample=SubsampleSpec("stratified", per_class=20),
            method="knn(1)",
        )
        (rec,) = run_experiment(cfg)
        assert rec.accuracy > 0.9

    def test_reductions_all_run(self, corpus_paths):
        for reduction in ("pca(2)", "lda", "flda"):
            cfg = small_config(*corpus_paths, reduction=reduction)
            (rec,) = run_experiment(cfg)
            assert rec.accuracy > 0.9, reduction
            assert rec.reduction == reduction

    def test_standardize_and_l2_flags(self, corpus_paths):
        for flags in ({"standardize": True}, {"l2_normalize": True}):
            cfg = small_config(*corpus_paths, **flags)
            (rec,) = run_experiment(cfg)
            assert rec.accuracy > 0.9

    def test_mean_k_used_sane(self, corpus_paths):
        cfg = small_config(*corpus_paths)
        (rec,) = run_experiment(cfg)
        assert 1.0 <= rec.mean_k_used <= 5.0

    def test_output_path_writes_report(self, corpus_paths, tmp_path):
        out = tmp_path / "report.csv"
        cfg = small_config(*corpus_paths, output_path=str(out))
        run_experiment(cfg)
        text = out.read_text()
        assert text.startswith("method,noise,rate,reduction,seed,")
        assert "# summary" in text

    def test_flda_filter_consumes_input_space_map(self, corpus_paths, monkeypatch):
        # sentinel check: the map handed to the flda fit must be the one
        # computed on the unprojected training set
        seen = {}
        real_compute = experiment.compute_reliability_map
        real_fit_flda = experiment.fit_flda

        def spy_compute(train, config=None, **kw):
            rmap = real_compute(train, config, **kw)
            seen.setdefault("maps", []).append((train.d, rmap))
            return rmap

        def spy_fit_flda(train, rmap):
            seen["filter_map"] = rmap
            seen["filter_dim"] = train.d
            return real_fit_flda(train, rmap)

        monkeypatch.setattr(experiment, "compute_reliability_map", spy_compute)
        monkeypatch.setattr(experiment, "fit_flda", spy_fit_flda)
        cfg = small_config(*corpus_paths, reduction="flda", method="wann")
        run_experiment(cfg)
        dims = [d for d, _ in seen["maps"]]
        assert seen["filter_dim"] == 4  # input space
        assert seen["filter_map"] is seen["maps"][0][1]
        assert dims[0] == 4 and dims[-1] == 2  # fresh map in projected space
        assert len(dims) == 2

    def test_error_carries_config_context(self, corpus_paths):
        from wann.exceptions import CapacityError

        cfg = small_config(*corpus_paths, reliability=ReliabilityConfig(151, 151))
        with pytest.raises(CapacityError, match="seed=0"):
            run_experiment(cfg)


class TestConfigJson:
    def test_round_trip(self, corpus_paths):
        cfg = ExperimentConfig(
            train_path=corpus_paths[0],
            test_path=corpus_paths[1],
            method="knn(17)",
            reduction="pca(8)",
            noise=NoiseSpec("symmetric", 0.4, seed=3),
            reliability=ReliabilityConfig(3, 7),
            subsample=SubsampleSpec("stratified", per_class=10),
            seeds=(0, 1, 2),
            standardize=True,
        )
        back = config_from_json(config_to_json(cfg))
        assert back == cfg

    def test_asymmetric_map_round_trip(self, corpus_paths):
        from wann.noise import builtin_flip_map

        cfg = ExperimentConfig(
            train_path=corpus_paths[0],
            test_path=corpus_paths[1],
            noise=NoiseSpec(
                "asymmetric", 0.2, seed=1, flip_map=builtin_flip_map("mnist")
            ),
        )
        back = config_from_json(config_to_json(cfg))
        assert back.noise.flip_map.mapping == {7: 1, 2: 7, 5: 6, 6: 5, 3: 8}

    def test_builtin_map_by_name(self, corpus_paths):
        payload = {
            "train_path": corpus_paths[0],
            "test_path": corpus_paths[1],
            "noise": {"kind": "asymmetric", "rate": 0.3, "flip_map": "cifar10"},
        }
        cfg = config_from_json(payload)
        assert cfg.noise.flip_map.mapping == {9: 1, 2: 0, 4: 7, 3: 5, 5: 3}

    def test_load_config_file(self, corpus_paths, tmp_path):
        payload = {
            "train_path": corpus_paths[0],
            "test_path": corpus_paths[1],
            "method": "ann",
            "seeds": [5],
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(payload))
        cfg = load_config(path)
        assert cfg.method == "ann"
        assert cfg.seeds == (5,)

    def test_missing_field_rejected(self):
        with pytest.raises(ValidationError):
            config_from_json({"train_path": "x"})

    def test_empty_seeds_rejected(self, corpus_paths):
        with pytest.raises(ValidationError):
            ExperimentConfig(
                train_path=corpus_paths[0], test_path=corpus_paths[1], seeds=()
            )


def make_record(**kw):
    defaults = dict(
        method="wann", noise="symmetric", rate=0.4, reduction="none",
        seed=0, accuracy=0.9, realized_rate=0.41, wall_ms=10.0, mean_k_used=3.0,
    )
    defaults.update(kw)
    return RunRecord(**defaults)


class TestReports:
    def test_summary_mean_and_sample_std(self):
        recs = [make_record(seed=s, accuracy=a) for s, a in enumerate([0.8, 0.9, 1.0])]
        (s,) = summarize(recs)
        assert s["n_seeds"] == 3
        assert s["accuracy_mean"] == pytest.approx(0.9)
        assert s["accuracy_std"] == pytest.approx(0.1)

    def test_single_seed_std_zero(self):
        (s,) = summarize([make_record()])
        assert s["accuracy_std"] == 0.0

    def test_group_order_lexicographic(self):
        recs = [
            make_record(method="wann", seed=0),
            make_record(method="ann", seed=0),
            make_record(method="knn(11)", seed=0),
        ]
        out = summarize(recs)
        assert [s["method"] for s in out] == ["ann", "knn(11)", "wann"]

    def test_csv_layout(self, tmp_path):
        path = tmp_path / "r.csv"
        recs = [make_record(seed=0, accuracy=0.8), make_record(seed=1, accuracy=0.9)]
        write_report(recs, path, "csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "method,noise,rate,reduction,seed,accuracy,realized_rate,wall_ms"
        assert lines[1].startswith("wann,symmetric,0.4,none,0,0.8,")
        assert lines[3] == "# summary"
        assert lines[4] == "# method,noise,rate,reduction,n_seeds,accuracy_mean,accuracy_std"
        data = lines[5].split(",")
        assert data[:5] == ["wann", "symmetric", "0.4", "none", "2"]
        assert "compute externally" in lines[6]

    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_report([], path, "csv")
        assert path.read_text().splitlines() == [
            "method,noise,rate,reduction,seed,accuracy,realized_rate,wall_ms"
        ]

    def test_two_groups_two_summary_rows(self, tmp_path):
        path = tmp_path / "r.csv"
        recs = [
            make_record(method="ann", seed=0),
            make_record(method="wann", seed=0),
        ]
        write_report(recs, path, "csv")
        lines = path.read_text().splitlines()
        marker = lines.index("# summary")
        rows = [l for l in lines[marker + 1:] if not l.startswith("#")]
        assert len(rows) == 2
        assert rows[0].startswith("ann,") and rows[1].startswith("wann,")

    def test_jsonl_layout(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_report([make_record(seed=0), make_record(seed=1)], path, "jsonl")
        objs = [json.loads(l) for l in path.read_text().splitlines()]
        runs = [o for o in objs if "accuracy" in o and "summary" not in o]
        summaries = [o for o in objs if "summary" in o]
        assert len(runs) == 2 and len(summaries) == 1
        assert summaries[0]["summary"]["n_seeds"] == 2
        assert runs[0]["mean_k_used"] == 3.0

    def test_bad_format_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_report([], tmp_path / "x.txt", "tsv")
