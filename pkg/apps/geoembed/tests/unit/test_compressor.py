import numpy as np
import pytest

from geoembed_common.errors import InvalidHeaderError
from geoembed_common.store import EmbeddingMatrix
from geoembed_common.store.container import write_container
from compression import (
    compress,
    explained_variance_ratio,
    fit_truncated_svd,
    load_svd_model,
    reconstruct,
    reconstruction_mse,
    save_svd_model,
    transform,
)
from compression.compressor import canonicalize_signs
from compression.svd_models import EmptyMatrixError, InvalidSvdModelError, KOutOfRangeError, SvdModel
from refiner import save_linear_map
from refiner.refiner_models import LinearMap


def _matrix(data, model_id="m") -> EmbeddingMatrix:
    return EmbeddingMatrix(data=np.asarray(data, dtype=float), model_id=model_id)


class TestFitTruncatedSvd:
    def test_diagonal_singular_values(self):
        model = fit_truncated_svd(_matrix(np.diag([3.0, 2.0, 1.0])), k=2, seed=0)

        np.testing.assert_allclose(model.singular_values, [3.0, 2.0], atol=1e-12)

    def test_components_are_orthonormal(self, make_embedding):
        model = fit_truncated_svd(make_embedding(40, 12), k=5, seed=0)

        np.testing.assert_allclose(model.components @ model.components.T, np.eye(5), atol=1e-10)

    def test_singular_values_non_increasing(self, make_embedding):
        model = fit_truncated_svd(make_embedding(40, 12), k=12, seed=0)

        assert np.all(np.diff(model.singular_values) <= 1e-12)

    @pytest.mark.parametrize("shape", [(64, 64), (50, 20), (8, 33), (64, 5)])
    def test_top_values_match_dense_svd(self, make_embedding, shape):
        x = make_embedding(*shape)
        k = min(shape) // 2 + 1

        model = fit_truncated_svd(x, k=k, seed=0)

        oracle = np.linalg.svd(x.as_float64(), compute_uv=False)[:k]
        np.testing.assert_allclose(model.singular_values, oracle, rtol=1e-6)

    @pytest.mark.parametrize("case", range(50))
    def test_random_matrices_match_dense_svd(self, case):
        rng = np.random.default_rng(1000 + case)
        n, d = (int(v) for v in rng.integers(2, 65, size=2))
        k = int(rng.integers(1, min(n, d) + 1))
        x = _matrix(rng.standard_normal((n, d)))

        model = fit_truncated_svd(x, k=k, seed=case)

        oracle = np.linalg.svd(x.as_float64(), compute_uv=False)[:k]
        np.testing.assert_allclose(model.singular_values, oracle, rtol=1e-6, atol=1e-12)
        np.testing.assert_allclose(model.components @ model.components.T, np.eye(k), atol=1e-10)

    def test_k_larger_than_min_dim(self, make_embedding):
        with pytest.raises(KOutOfRangeError) as exc:
            fit_truncated_svd(make_embedding(5, 10), k=6, seed=0)
        assert exc.value.code == "k_out_of_range"

    def test_k_zero(self, make_embedding):
        with pytest.raises(KOutOfRangeError):
            fit_truncated_svd(make_embedding(5, 10), k=0, seed=0)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrixError):
            fit_truncated_svd(_matrix(np.zeros((0, 4))), k=1, seed=0)

    def test_all_zero_input_gives_valid_model(self):
        model = fit_truncated_svd(_matrix(np.zeros((4, 3))), k=2, seed=0)

        np.testing.assert_array_equal(model.singular_values, [0.0, 0.0])
        np.testing.assert_allclose(model.components @ model.components.T, np.eye(2))

    def test_same_seed_is_bit_identical(self, make_embedding):
        x = make_embedding(300, 280)
        first = fit_truncated_svd(x, k=16, seed=3)
        second = fit_truncated_svd(x, k=16, seed=3)

        assert first.components.tobytes() == second.components.tobytes()

    def test_randomized_path_matches_exact_top_values(self, rng):
        # clear spectral gap so the range finder converges
        u = np.linalg.qr(rng.standard_normal((300, 300)))[0][:, :10]
        v = np.linalg.qr(rng.standard_normal((280, 280)))[0][:, :10]
        x = _matrix((u * np.arange(20.0, 10.0, -1.0)) @ v.T + 1e-3 * rng.standard_normal((300, 280)))

        randomized = fit_truncated_svd(x, k=5, seed=0)
        exact = fit_truncated_svd(x, k=5, seed=0, exact_max_dim=1000)

        np.testing.assert_allclose(randomized.singular_values, exact.singular_values, rtol=1e-6)
        np.testing.assert_allclose(np.abs(randomized.components @ exact.components.T), np.eye(5), atol=1e-5)

    def test_sign_canonicalisation(self):
        comps = canonicalize_signs(np.array([[-1.0, 2.0], [0.0, -3.0]]))

        np.testing.assert_array_equal(comps, [[1.0, -2.0], [0.0, 3.0]])


class TestTransformReconstruct:
    def test_rank_one_recovery(self, rng):
        x = _matrix(np.outer(rng.standard_normal(30), rng.standard_normal(8)))
        model = fit_truncated_svd(x, k=1, seed=0)

        mse = reconstruction_mse(x, reconstruct(model, transform(model, x)))

        # float32 storage bounds the error, not the factorisation
        assert mse < 1e-10

    def test_full_rank_reproduces_input(self, make_embedding):
        x = make_embedding(50, 20)
        model = fit_truncated_svd(x, k=20, seed=0)

        assert reconstruction_mse(x, reconstruct(model, transform(model, x))) < 1e-9

    def test_low_rank_elementwise(self, make_embedding):
        x = make_embedding(40, 16, rank=4)
        model = fit_truncated_svd(x, k=4, seed=0)

        x_hat = reconstruct(model, transform(model, x))

        np.testing.assert_allclose(x_hat.data, x.data, atol=1e-5)

    def test_zero_input_maps_to_zero(self, make_embedding):
        model = fit_truncated_svd(make_embedding(20, 6), k=3, seed=0)

        z = transform(model, _matrix(np.zeros((4, 6))))

        np.testing.assert_array_equal(z.data, np.zeros((4, 3)))
        np.testing.assert_array_equal(reconstruct(model, z).data, np.zeros((4, 6)))

    def test_complete_basis_preserves_row_norms(self, make_embedding):
        x = make_embedding(30, 8)
        model = fit_truncated_svd(x, k=8, seed=0)

        z = transform(model, x)

        np.testing.assert_allclose(
            np.linalg.norm(z.data, axis=1), np.linalg.norm(x.data, axis=1), rtol=1e-5
        )

    def test_more_components_never_worse(self, make_embedding):
        x = make_embedding(30, 10)
        errors = []
        for k in (1, 2):
            model = fit_truncated_svd(x, k=k, seed=0)
            errors.append(reconstruction_mse(x, reconstruct(model, transform(model, x))))

        assert errors[1] <= errors[0]

    def test_transform_keeps_row_ids(self, make_embedding):
        x = make_embedding(10, 6)
        model, z = compress(x, 3, seed=0, model_id="slot")

        assert z.row_ids == x.row_ids
        assert z.model_id == "slot"
        assert z.shape == (10, 3)


class TestReconstructionMse:
    def test_identical(self, make_embedding):
        x = make_embedding(3, 3)
        assert reconstruction_mse(x, x) == 0.0

    def test_single_element(self):
        assert reconstruction_mse(_matrix([[0.0]]), _matrix([[2.0]])) == 4.0

    def test_one_element_differs(self):
        assert reconstruction_mse(_matrix([[1, 2], [3, 4]]), _matrix([[1, 2], [3, 0]])) == 4.0


class TestCenteredVariant:
    def test_centered_model_records_mean(self, make_embedding):
        x = make_embedding(30, 6)
        model = fit_truncated_svd(x, k=6, seed=0, center=True)

        assert model.centered
        np.testing.assert_allclose(model.mean, x.as_float64().mean(axis=0))
        assert reconstruction_mse(x, reconstruct(model, transform(model, x))) < 1e-9

    def test_offset_data_needs_centring(self, rng):
        x = _matrix(100.0 + rng.standard_normal((50, 5)))

        plain = fit_truncated_svd(x, k=1, seed=0)
        centered = fit_truncated_svd(x, k=1, seed=0, center=True)

        # the uncentred top component points at the offset
        assert abs(plain.components[0] @ np.ones(5) / np.sqrt(5)) > 0.99
        assert explained_variance_ratio(centered, x) < explained_variance_ratio(plain, x)


class TestSvdModelFiles:
    def test_save_load(self, tmp_path, make_embedding):
        model = fit_truncated_svd(make_embedding(20, 6), k=3, seed=5, center=True)
        save_svd_model(model, tmp_path / "m.svd")

        loaded = load_svd_model(tmp_path / "m.svd")

        assert loaded.seed == 5 and loaded.centered
        np.testing.assert_allclose(loaded.components, model.components, atol=1e-6)
        np.testing.assert_allclose(loaded.singular_values, model.singular_values, rtol=1e-6)

    def test_wrong_kind_rejected(self, tmp_path):
        save_linear_map(LinearMap.identity(3), tmp_path / "map.emb")

        with pytest.raises(InvalidHeaderError):
            load_svd_model(tmp_path / "map.emb")

    def test_non_orthonormal_file_rejected(self, tmp_path):
        header = {"kind": "svd1", "dtype": "f32", "k": 2, "D": 3, "seed": 0, "centered": False}
        components = 2.0 * np.eye(2, 3)
        write_container(tmp_path / "bad.svd", header, np.concatenate([components.ravel(), [2.0, 1.0]]))

        with pytest.raises(InvalidSvdModelError) as exc:
            load_svd_model(tmp_path / "bad.svd")
        assert exc.value.code == "invalid_svd_model"

    def test_increasing_singular_values_rejected(self):
        with pytest.raises(InvalidSvdModelError):
            SvdModel(components=np.eye(2, 4), singular_values=[1.0, 3.0], seed=0)

    def test_mean_width_must_match_input(self):
        with pytest.raises(InvalidSvdModelError):
            SvdModel(components=np.eye(2, 4), singular_values=[3.0, 1.0], seed=0, mean=np.zeros(3))
