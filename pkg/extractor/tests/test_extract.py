import json

import numpy as np
import pytest
from PIL import Image

from folder_fixtures import CLASS_NAMES, build_image_folder
from embed_extract import (
    DEFAULT_MODEL,
    ExtractionError,
    FolderLayoutError,
    ImageDecodeError,
    ModelUnavailableError,
    available_models,
    extract_embeddings,
    load_backbone,
    manifest_path,
    model_dim,
    read_evec,
    scan_folder,
    write_evec,
)
from embed_extract import backbones as backbones_mod


class TestFolderScan:
    def test_sorted_stable_order(self, image_folder):
        index = scan_folder(image_folder)
        assert index.class_names == CLASS_NAMES
        assert index.n == 100
        labels = [e.label for e in index.entries]
        assert labels == sorted(labels)
        paths = [e.path for e in index.entries]
        assert paths == sorted(paths)

    def test_flat_folder_is_single_bucket(self, tmp_path):
        arr = np.zeros((8, 8, 3), dtype=np.uint8)
        for i in range(3):
            Image.fromarray(arr).save(tmp_path / f"p{i}.png")
        index = scan_folder(tmp_path)
        assert index.class_names == ("unlabeled",)
        assert [e.label for e in index.entries] == [0, 0, 0]

    def test_mixed_layout_rejected(self, image_folder):
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(
            image_folder / "stray.png"
        )
        with pytest.raises(FolderLayoutError, match="mixes"):
            scan_folder(image_folder)

    def test_empty_folder_rejected(self, tmp_path):
        with pytest.raises(FolderLayoutError, match="no images"):
            scan_folder(tmp_path)

    def test_missing_folder_rejected(self, tmp_path):
        with pytest.raises(FolderLayoutError, match="not a directory"):
            scan_folder(tmp_path / "nowhere")

    def test_empty_subfolders_do_not_become_classes(self, tmp_path):
        build_image_folder(tmp_path, per_class=2, class_names=("a", "c"))
        (tmp_path / "b").mkdir()
        index = scan_folder(tmp_path)
        assert index.class_names == ("a", "c")
        assert {e.label for e in index.entries} == {0, 1}

    def test_non_image_files_ignored(self, tmp_path):
        build_image_folder(tmp_path, per_class=2, class_names=("a",))
        (tmp_path / "a" / "notes.txt").write_text("not an image")
        assert scan_folder(tmp_path).n == 2


class TestBackbones:
    def test_registry(self):
        assert DEFAULT_MODEL == "stats-1024"
        assert set(available_models()) == {"stats-1024", "dinov2-large"}
        assert model_dim("stats-1024") == 1024
        assert model_dim("dinov2-large") == 1024

    def test_unknown_model(self):
        with pytest.raises(ModelUnavailableError, match="unknown model"):
            model_dim("resnet-9000")
        with pytest.raises(ModelUnavailableError, match="unknown model"):
            load_backbone("resnet-9000")

    def test_default_encode_shape_and_determinism(self):
        rng = np.random.default_rng(3)
        imgs = [
            Image.fromarray(rng.integers(0, 256, size=(37, 29, 3), dtype=np.uint8))
            for _ in range(4)
        ]
        backbone = load_backbone(DEFAULT_MODEL)
        out = backbone.encode(imgs)
        assert out.shape == (4, 1024)
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, backbone.encode(imgs))
        # batching is an I/O detail, not a numeric one
        np.testing.assert_array_equal(
            out[:2], backbone.encode(imgs[:2])
        )


class TestExtract:
    def test_hundred_image_folder(self, image_folder, tmp_path):
        out = tmp_path / "corpus.evec"
        manifest = extract_embeddings(image_folder, out)
        assert manifest.image_count == 100
        assert manifest.dim == 1024
        assert manifest.num_classes == 10
        assert manifest.class_names == CLASS_NAMES
        assert manifest.model == DEFAULT_MODEL
        assert len(manifest.sha256) == 64
        assert manifest.skipped == ()

        emb, labels, ids, num_classes = read_evec(out)
        assert emb.shape == (100, 1024)
        assert num_classes == 10
        assert ids.tolist() == list(range(100))
        assert np.bincount(labels, minlength=10).tolist() == [10] * 10

        sidecar = json.loads(manifest_path(out).read_text())
        assert sidecar["sha256"] == manifest.sha256
        assert sidecar["image_count"] == 100

    def test_reruns_are_byte_identical(self, image_folder, tmp_path):
        a, b = tmp_path / "a.evec", tmp_path / "b.evec"
        first = extract_embeddings(image_folder, a, batch_size=7)
        second = extract_embeddings(image_folder, b, batch_size=100)
        assert first.sha256 == second.sha256
        assert a.read_bytes() == b.read_bytes()

    def test_own_save_load_round_trip(self, image_folder, tmp_path):
        out = tmp_path / "corpus.evec"
        extract_embeddings(image_folder, out)
        emb, labels, ids, num_classes = read_evec(out)
        again = tmp_path / "again.evec"
        write_evec(again, emb, labels, ids, num_classes)
        assert out.read_bytes() == again.read_bytes()

    def test_undecodable_aborts_by_default(self, image_folder, tmp_path):
        (image_folder / "bird" / "img_000.png").write_bytes(b"junk")
        with pytest.raises(ImageDecodeError, match="img_000"):
            extract_embeddings(image_folder, tmp_path / "x.evec")

    def test_undecodable_skipped_on_request(self, image_folder, tmp_path):
        (image_folder / "bird" / "img_000.png").write_bytes(b"junk")
        out = tmp_path / "x.evec"
        manifest = extract_embeddings(image_folder, out, on_decode_error="skip")
        assert manifest.image_count == 99
        assert len(manifest.skipped) == 1
        assert manifest.skipped[0].endswith("img_000.png")
        _, labels, ids, num_classes = read_evec(out)
        assert ids.tolist() == list(range(99))  # ids renumber the kept rows
        assert num_classes == 10
        assert int(np.bincount(labels, minlength=10)[0]) == 9

    def test_all_images_undecodable(self, tmp_path):
        folder = tmp_path / "imgs" / "a"
        folder.mkdir(parents=True)
        (folder / "bad.png").write_bytes(b"junk")
        with pytest.raises(ExtractionError, match="no decodable images"):
            extract_embeddings(tmp_path / "imgs", tmp_path / "x.evec",
                               on_decode_error="skip")

    def test_bad_arguments(self, image_folder, tmp_path):
        with pytest.raises(ExtractionError, match="batch size"):
            extract_embeddings(image_folder, tmp_path / "x.evec", batch_size=0)
        with pytest.raises(ExtractionError, match="on_decode_error"):
            extract_embeddings(
                image_folder, tmp_path / "x.evec", on_decode_error="ignore"
            )

    def test_backbone_load_failure_is_fatal(self, image_folder, tmp_path, monkeypatch):
        def broken():
            raise ModelUnavailableError("weights missing")

        monkeypatch.setitem(backbones_mod._REGISTRY, "stats-1024", (1024, broken))
        with pytest.raises(ModelUnavailableError, match="weights missing"):
            extract_embeddings(image_folder, tmp_path / "x.evec")
