"""Binary container format: round trips, layout arithmetic, validation."""

import json
import struct

import numpy as np
import pytest

from dirmix.container import (
    MAGIC,
    ContainerFormatError,
    Manifest,
    inspect_container,
    manifest_path,
    read_container,
    write_container,
)
from dirmix.core import ContentKind, FeatureSet


def probability_features(rng, n, k, labeled=True):
    rows = rng.dirichlet(np.ones(k), size=n)
    return FeatureSet(
        rows=rows,
        content_kind=ContentKind.SIMPLEX_PROBABILITIES,
        labels=rng.integers(0, k, n) if labeled else None,
        class_names=tuple(f"c{i}" for i in range(k)),
    )


def manifest_for(fs):
    return Manifest(
        dataset="unit-test",
        class_names=list(fs.class_names) if fs.class_names else None,
        temperature=30.0,
        encoder="test-encoder",
        prompt_template="a photo of a {}",
    )


class TestRoundTrip:
    def test_f64_payload_bitwise_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        fs = probability_features(rng, 3, 2)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path, dtype="f64")
        loaded, manifest = read_container(path)
        assert np.array_equal(loaded.rows, fs.rows)
        assert np.array_equal(loaded.labels, fs.labels)
        assert loaded.class_names == fs.class_names
        assert manifest.temperature == 30.0

    def test_f32_round_trip_at_declared_precision(self, tmp_path):
        rng = np.random.default_rng(1)
        fs = probability_features(rng, 50, 4)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path, dtype="f32")
        loaded, _ = read_container(path)
        assert loaded.rows.dtype == np.float64
        assert np.array_equal(loaded.rows, fs.rows.astype(np.float32).astype(np.float64))

    def test_unlabeled_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        fs = probability_features(rng, 10, 3, labeled=False)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        loaded, _ = read_container(path)
        assert loaded.labels is None

    def test_raw_embedding_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        fs = FeatureSet(
            rows=rng.normal(size=(20, 8)),
            content_kind=ContentKind.RAW_EMBEDDINGS,
            labels=rng.integers(0, 4, 20),
            class_names=("a", "b", "c", "d"),
        )
        path = tmp_path / "raw.smpx"
        write_container(fs, manifest_for(fs), path)
        loaded, _ = read_container(path)
        assert loaded.content_kind is ContentKind.RAW_EMBEDDINGS
        assert np.array_equal(loaded.rows, fs.rows)


class TestLayout:
    def test_file_size_formula(self, tmp_path):
        # 32-byte header (8 magic + 24 fields), then payload, then labels
        rng = np.random.default_rng(4)
        n, k = 1000, 5
        fs = probability_features(rng, n, k)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path, dtype="f32")
        assert path.stat().st_size == 32 + 4 * n * k + 4 * n

    def test_header_fields(self, tmp_path):
        rng = np.random.default_rng(5)
        fs = probability_features(rng, 7, 3)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path, dtype="f64")
        blob = path.read_bytes()
        magic, version, content, dtype_code, has_labels, n, dim = struct.unpack_from(
            "<8sHBBB3xQQ", blob
        )
        assert magic == MAGIC
        assert version == 1
        assert content == 1
        assert dtype_code == 2
        assert has_labels == 1
        assert (n, dim) == (7, 3)


class TestValidation:
    def test_bad_row_sums_rejected_on_write(self, tmp_path):
        # sneak a 0.9-sum row past the FeatureSet constructor so the
        # writer's own guard is what trips
        bad = FeatureSet(rows=np.array([[0.5, 0.4]]), content_kind=ContentKind.RAW_EMBEDDINGS)
        object.__setattr__(bad, "content_kind", ContentKind.SIMPLEX_PROBABILITIES)
        with pytest.raises(ContainerFormatError, match="sums to"):
            write_container(bad, Manifest(dataset="x"), tmp_path / "bad.smpx")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.smpx"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
        with pytest.raises(ContainerFormatError, match="not a feature container"):
            read_container(path)

    def test_truncated_payload_reports_sizes(self, tmp_path):
        rng = np.random.default_rng(6)
        fs = probability_features(rng, 10, 3)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(ContainerFormatError, match="expected .* bytes"):
            read_container(path)

    def test_unsupported_version(self, tmp_path):
        rng = np.random.default_rng(7)
        fs = probability_features(rng, 4, 2)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        blob = bytearray(path.read_bytes())
        blob[8:10] = struct.pack("<H", 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="version"):
            read_container(path)

    def test_unknown_dtype_code(self, tmp_path):
        rng = np.random.default_rng(8)
        fs = probability_features(rng, 4, 2)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        blob = bytearray(path.read_bytes())
        blob[11] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="dtype"):
            read_container(path)

    def test_corrupted_probability_payload_rejected_on_read(self, tmp_path):
        rng = np.random.default_rng(9)
        fs = probability_features(rng, 4, 2, labeled=False)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<d", blob, 32, 25.0)  # first payload value
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="sums to"):
            read_container(path)

    def test_missing_manifest(self, tmp_path):
        rng = np.random.default_rng(10)
        fs = probability_features(rng, 4, 2)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        manifest_path(path).unlink()
        with pytest.raises(ContainerFormatError, match="manifest"):
            read_container(path)

    def test_manifest_class_names_must_match_dim(self, tmp_path):
        rng = np.random.default_rng(11)
        fs = probability_features(rng, 4, 3)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        record = json.loads(manifest_path(path).read_text())
        record["class_names"] = ["only", "two"]
        manifest_path(path).write_text(json.dumps(record))
        with pytest.raises(ContainerFormatError, match="class names"):
            read_container(path)

    def test_writer_rejects_inconsistent_manifest(self, tmp_path):
        rng = np.random.default_rng(12)
        fs = probability_features(rng, 4, 3)
        manifest = Manifest(dataset="x", class_names=["a", "b"])
        with pytest.raises(ContainerFormatError, match="class names"):
            write_container(fs, manifest, tmp_path / "t.smpx")


class TestInspect:
    def test_summary_fields(self, tmp_path):
        rng = np.random.default_rng(13)
        fs = probability_features(rng, 30, 4)
        path = tmp_path / "t.smpx"
        write_container(fs, manifest_for(fs), path)
        info = inspect_container(path)
        assert info["n_samples"] == 30
        assert info["dim"] == 4
        assert info["content_kind"] == "simplex_probabilities"
        assert info["has_labels"] is True
        assert sum(info["label_histogram"]) == 30
        assert 1 - 1e-5 <= info["row_sum_min"] <= info["row_sum_max"] <= 1 + 1e-5
