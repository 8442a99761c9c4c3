import struct

import numpy as np
import pytest

from geoembed_common.errors import (
    BadMagicError,
    DimensionMismatchError,
    InvalidHeaderError,
    ManifestError,
    MetadataError,
    NonFiniteValuesError,
    RowAlignmentError,
    SizeMismatchError,
    StoreIOError,
    TruncatedFileError,
)
from geoembed_common.store import (
    EmbeddingMatrix,
    Manifest,
    SampleMetadata,
    concat_columns,
    l2_normalize_rows,
    load_embeddings,
    load_metadata,
    save_embeddings,
    save_metadata,
    stack_rows,
)
from geoembed_common.store.container import MAGIC, write_container
from utils.hashing import hash_file


def _header(n_rows, n_cols, **extra):
    header = {"n_rows": n_rows, "n_cols": n_cols, "dtype": "f32", "order": "row_major", "model_id": "m"}
    header.update(extra)
    return header


class TestLoadEmbeddings:
    def test_payload_decodes_row_major(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(2, 3), np.arange(1, 7, dtype=np.float32))

        m = load_embeddings(path)

        assert m.shape == (2, 3)
        np.testing.assert_array_equal(m.data, [[1, 2, 3], [4, 5, 6]])

    def test_short_payload_is_size_mismatch(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(2, 3), np.arange(5, dtype=np.float32))

        with pytest.raises(SizeMismatchError) as exc:
            load_embeddings(path)
        assert exc.value.code == "size_mismatch"

    def test_payload_cut_inside_a_float_is_truncated(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(2, 3), np.arange(6, dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-2])

        with pytest.raises(TruncatedFileError) as exc:
            load_embeddings(path)
        assert exc.value.code == "truncated_payload"

    def test_header_longer_than_file_is_truncated(self, tmp_path):
        path = tmp_path / "a.emb"
        path.write_bytes(MAGIC + struct.pack("<I", 500) + b"{}")

        with pytest.raises(TruncatedFileError):
            load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.emb"
        path.write_bytes(b"NOPE" + b"\x00" * 16)

        with pytest.raises(BadMagicError) as exc:
            load_embeddings(path)
        assert exc.value.code == "bad_magic"

    def test_nan_in_payload_rejected(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(1, 2), np.array([1.0, np.nan], dtype=np.float32))

        with pytest.raises(NonFiniteValuesError):
            load_embeddings(path)

    def test_missing_header_key(self, tmp_path):
        path = tmp_path / "a.emb"
        header = _header(1, 1)
        del header["model_id"]
        write_container(path, header, np.zeros(1, dtype=np.float32))

        with pytest.raises(InvalidHeaderError):
            load_embeddings(path)

    def test_other_container_kind_rejected(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(1, 1, kind="svd1"), np.zeros(1, dtype=np.float32))

        with pytest.raises(InvalidHeaderError):
            load_embeddings(path)

    def test_unknown_header_keys_become_attrs(self, tmp_path):
        path = tmp_path / "a.emb"
        write_container(path, _header(1, 1, source="sentinel-2"), np.zeros(1, dtype=np.float32))

        assert load_embeddings(path).attrs == {"source": "sentinel-2"}


    def test_missing_file(self, tmp_path):
        with pytest.raises(StoreIOError) as exc:
            load_embeddings(tmp_path / "absent.emb")
        assert exc.value.code == "io_error"
        assert exc.value.stage == "store"


class TestSaveEmbeddings:
    def test_parent_is_a_file(self, tmp_path, make_embedding):
        (tmp_path / "blocker").write_text("not a directory")

        with pytest.raises(StoreIOError) as exc:
            save_embeddings(make_embedding(2, 2), tmp_path / "blocker" / "m.emb")
        assert exc.value.code == "io_error"

    def test_round_trip_is_bit_identical(self, tmp_path, make_embedding):
        m = make_embedding(7, 5, season="summer")
        save_embeddings(m, tmp_path / "m.emb")

        loaded = load_embeddings(tmp_path / "m.emb")

        assert loaded.equals(m)

    def test_empty_matrix(self, tmp_path):
        save_embeddings(EmbeddingMatrix(data=np.zeros((0, 0)), model_id="empty"), tmp_path / "e.emb")

        assert load_embeddings(tmp_path / "e.emb").shape == (0, 0)

    def test_single_value_exact(self, tmp_path):
        save_embeddings(EmbeddingMatrix(data=[[3.5]], model_id="one"), tmp_path / "one.emb")

        assert load_embeddings(tmp_path / "one.emb").data[0, 0] == np.float32(3.5)

    def test_repeated_saves_hash_identically(self, tmp_path, make_embedding):
        m = make_embedding(1000, 64)
        save_embeddings(m, tmp_path / "a.emb")
        save_embeddings(m, tmp_path / "b.emb")

        assert hash_file(tmp_path / "a.emb") == hash_file(tmp_path / "b.emb")

    def test_no_temp_file_left_behind(self, tmp_path, make_embedding):
        save_embeddings(make_embedding(3, 2), tmp_path / "m.emb")

        assert [p.name for p in tmp_path.iterdir()] == ["m.emb"]


class TestEmbeddingMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteValuesError):
            EmbeddingMatrix(data=[[1.0, np.inf]], model_id="bad")

    def test_rejects_wrong_row_id_count(self):
        with pytest.raises(RowAlignmentError) as exc:
            EmbeddingMatrix(data=np.zeros((2, 2)), model_id="m", row_ids=["a"])
        assert exc.value.code == "row_count_mismatch"

    def test_rejects_one_dimensional_data(self):
        with pytest.raises(DimensionMismatchError):
            EmbeddingMatrix(data=np.zeros(3), model_id="m")

    def test_data_is_read_only(self, make_embedding):
        m = make_embedding(2, 2)
        with pytest.raises(ValueError):
            m.data[0, 0] = 1.0

    def test_l2_normalize_rows_keeps_zero_rows(self):
        m = EmbeddingMatrix(data=[[3.0, 4.0], [0.0, 0.0]], model_id="m")

        out = l2_normalize_rows(m)

        np.testing.assert_allclose(out.data, [[0.6, 0.8], [0.0, 0.0]], atol=1e-7)


class TestConcatColumns:
    def test_four_seasons_concatenate_to_512(self, make_embedding):
        seasons = [make_embedding(10, 128, season=s) for s in ("spring", "summer", "fall", "winter")]

        assert concat_columns(seasons).shape == (10, 512)

    def test_single_input_is_identity(self, make_embedding):
        m = make_embedding(4, 3)

        out = concat_columns([m])

        np.testing.assert_array_equal(out.data, m.data)

    def test_small_example(self):
        a = EmbeddingMatrix(data=[[1], [2]], model_id="a")
        b = EmbeddingMatrix(data=[[3], [4]], model_id="b")

        np.testing.assert_array_equal(concat_columns([a, b]).data, [[1, 3], [2, 4]])

    def test_row_count_mismatch(self, make_embedding):
        with pytest.raises(RowAlignmentError):
            concat_columns([make_embedding(3, 2), make_embedding(4, 2)])

    def test_row_id_mismatch(self):
        a = EmbeddingMatrix(data=np.zeros((2, 1)), model_id="a", row_ids=["x", "y"])
        b = EmbeddingMatrix(data=np.zeros((2, 1)), model_id="b", row_ids=["y", "x"])

        with pytest.raises(RowAlignmentError) as exc:
            concat_columns([a, b])
        assert exc.value.code == "row_id_mismatch"

    def test_stack_rows_needs_equal_widths(self, make_embedding):
        with pytest.raises(DimensionMismatchError):
            stack_rows([make_embedding(2, 3), make_embedding(2, 4)], model_id="x")


class TestManifest:
    def test_relative_paths_resolve_against_manifest(self, tmp_path, make_embedding):
        save_embeddings(make_embedding(3, 2, model_id="a"), tmp_path / "data" / "a.emb")
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text('{"entries": [{"model_id": "a", "path": "data/a.emb"}]}')

        manifest = Manifest.from_file(manifest_path)

        assert manifest.entries[0].path == tmp_path / "data" / "a.emb"
        assert manifest.load_matrices()["a"].shape == (3, 2)

    def test_seasonal_entries_use_slot_keys(self, ensemble_manifest):
        manifest = Manifest.from_file(ensemble_manifest(n_rows=8))

        assert manifest.get_entry("georsclip_winter").season == "winter"
        assert len(manifest.seasons_of("georsclip")) == 4
        assert manifest.load_matrices()["georsclip_fall"].season == "fall"

    def test_missing_manifest_file(self, tmp_path):
        with pytest.raises(StoreIOError):
            Manifest.from_file(tmp_path / "absent.json")

    def test_duplicate_entries_rejected(self):
        raw = '{"entries": [{"model_id": "a", "path": "x"}, {"model_id": "a", "path": "y"}]}'
        with pytest.raises(ManifestError):
            Manifest.from_json_string(raw)


class TestMetadata:
    def test_round_trip_with_missing_values(self, tmp_path):
        rows = [
            SampleMetadata(sample_id="001", lat=47.6, lon=-122.3, population=1200.0),
            SampleMetadata(sample_id="002"),
        ]
        save_metadata(rows, tmp_path / "meta.csv")

        loaded = load_metadata(tmp_path / "meta.csv")

        assert loaded[0].sample_id == "001"
        assert loaded[0].lat == pytest.approx(47.6)
        assert loaded[0].forest_cover is None
        assert not loaded[1].has_location

    def test_wrong_header(self, tmp_path):
        (tmp_path / "meta.csv").write_text("id,lat\n1,2\n")

        with pytest.raises(MetadataError):
            load_metadata(tmp_path / "meta.csv")

    def test_out_of_range_latitude(self, tmp_path):
        (tmp_path / "meta.csv").write_text(
            "sample_id,lat,lon,forest_cover,elevation,nightlights,population\na,91,0,,,,\n"
        )

        with pytest.raises(MetadataError):
            load_metadata(tmp_path / "meta.csv")
