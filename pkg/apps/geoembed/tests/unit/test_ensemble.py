import numpy as np
import pytest

from geoembed_common.errors import DimensionMismatchError
from geoembed_common.store import EmbeddingMatrix
from ensemble import (
    EnsembleLayout,
    InfeasiblePlanError,
    LayoutError,
    MissingSlotError,
    compose,
    default_layout,
    layout_from_widths,
    resolve_layout,
    search_rates,
    slice_slot,
    with_widths,
)


@pytest.fixture
def slot_inputs(make_embedding):
    def _make(layout: EnsembleLayout, n_rows: int = 5):
        return {
            slot.model_id: make_embedding(n_rows, slot.width, model_id=slot.model_id)
            for slot in layout.slots
        }

    return _make


class TestDefaultLayout:
    def test_slot_ranges(self):
        layout = default_layout()

        assert layout.total_dim == 1024
        assert len(layout.slots) == 7
        assert layout.get_slot("vit_huge_clip").width == 256
        assert layout.boundaries == [0, 128, 384, 512, 640, 768, 896, 1024]
        assert layout.model_ids[3:] == [
            "georsclip_spring", "georsclip_summer", "georsclip_fall", "georsclip_winter"
        ]

    def test_resolve_named_default(self):
        assert resolve_layout("default") == default_layout()

    def test_with_widths_recomputes_ranges(self):
        layout = with_widths(default_layout(), {"vit_huge_clip": 64})

        assert layout.total_dim == 832
        assert layout.get_slot("vit_base_dino").start == 192
        assert layout.get_slot("vit_huge_clip").source_dim == 1024

    def test_with_widths_unknown_slot(self):
        with pytest.raises(LayoutError):
            with_widths(default_layout(), {"resnet": 32})

    def test_layout_file_round_trip(self, tmp_path):
        path = tmp_path / "layout.json"
        default_layout().to_file(path)

        assert resolve_layout(path) == default_layout()

    def test_gap_between_slots_rejected(self):
        data = {"slots": [
            {"model_id": "a", "start": 0, "end": 4},
            {"model_id": "b", "start": 5, "end": 8},
        ]}

        with pytest.raises(LayoutError) as exc:
            resolve_layout(data)
        assert exc.value.code == "invalid_layout"

    def test_duplicate_slot_rejected(self):
        with pytest.raises(LayoutError):
            layout_from_widths([("a", 4), ("a", 4)])


class TestCompose:
    def test_default_layout_width(self, slot_inputs):
        layout = default_layout()

        ensemble = compose(layout, slot_inputs(layout))

        assert ensemble.shape == (5, 1024)
        assert ensemble.model_id == "ensemble"

    def test_dino_columns_read_back(self, slot_inputs):
        layout = default_layout()
        inputs = slot_inputs(layout)

        ensemble = compose(layout, inputs)

        np.testing.assert_array_equal(ensemble.data[:, 384:512], inputs["vit_base_dino"].data)
        assert slice_slot(ensemble, layout, "vit_base_dino").data.tobytes() == \
            inputs["vit_base_dino"].data.tobytes()

    def test_every_slot_recovered(self, slot_inputs):
        layout = default_layout()
        inputs = slot_inputs(layout)

        ensemble = compose(layout, inputs)

        for model_id, matrix in inputs.items():
            np.testing.assert_array_equal(slice_slot(ensemble, layout, model_id).data, matrix.data)

    def test_single_slot_is_identity(self, make_embedding):
        x = make_embedding(4, 6, model_id="only")

        ensemble = compose(layout_from_widths([("only", 6)]), {"only": x})

        np.testing.assert_array_equal(ensemble.data, x.data)
        assert ensemble.row_ids == x.row_ids

    def test_missing_slot(self, slot_inputs):
        layout = default_layout()
        inputs = slot_inputs(layout)
        del inputs["vit_base_dino"]

        with pytest.raises(MissingSlotError) as exc:
            compose(layout, inputs)
        assert exc.value.code == "missing_slot:vit_base_dino"

    def test_width_mismatch(self, make_embedding):
        layout = layout_from_widths([("a", 4)])

        with pytest.raises(DimensionMismatchError) as exc:
            compose(layout, {"a": make_embedding(3, 5, model_id="a")})
        assert exc.value.code == "slot_width_mismatch"

    def test_normalized_slots_have_unit_rows(self, slot_inputs):
        layout = layout_from_widths([("a", 3), ("b", 5)])

        ensemble = compose(layout, slot_inputs(layout), normalize_slots=True)

        for start, end in [(0, 3), (3, 8)]:
            norms = np.linalg.norm(ensemble.data[:, start:end].astype(np.float64), axis=1)
            np.testing.assert_allclose(norms, 1.0, rtol=1e-6)


class TestSearchRates:
    def test_single_forced_choice(self, make_embedding):
        x = make_embedding(130, 130, model_id="m")

        plan = search_rates({"m": x}, {"m": [128]}, 128, k_clusters=3, seed=0)

        assert plan.targets == {"m": 128}
        assert len(plan.table) == 1

    def test_low_rank_model_gets_fewer_dims(self, rng):
        low = EmbeddingMatrix(
            data=rng.standard_normal((150, 8)) @ rng.standard_normal((8, 200)), model_id="low"
        )
        high = EmbeddingMatrix(data=rng.standard_normal((150, 200)), model_id="high")

        plan = search_rates(
            {"low": low, "high": high},
            {"low": [8, 16], "high": [112, 120]},
            128,
            k_clusters=4,
            seed=0,
            mse_weight=50.0,
        )

        assert plan.targets == {"low": 8, "high": 120}
        assert plan.quality["low"].row_for(8).normalized_mse < 1e-9

    def test_default_weight_split_matches_hand_scores(self, rng):
        embeddings = {
            "low": EmbeddingMatrix(
                data=rng.standard_normal((150, 8)) @ rng.standard_normal((8, 200)), model_id="low"
            ),
            "high": EmbeddingMatrix(data=rng.standard_normal((150, 200)), model_id="high"),
        }

        plan = search_rates(embeddings, {"low": [8, 16], "high": [112, 120]}, 128, k_clusters=4, seed=0)

        assert plan.mse_weight == 1.0
        assert [row.dims for row in plan.table] == [{"low": 8, "high": 120}, {"low": 16, "high": 112}]
        for row in plan.table:
            by_hand = 0.0
            for model_id, dim in row.dims.items():
                a = embeddings[model_id].as_float64()
                tail_energy = np.sum(np.linalg.svd(a, compute_uv=False)[dim:] ** 2)
                normalized_mse = tail_energy / a.size / np.var(a, axis=0).mean()
                quality = plan.quality[model_id].row_for(dim)
                by_hand += quality.silhouette - quality.silhouette_baseline - normalized_mse
            assert row.score == pytest.approx(by_hand, abs=1e-6)
        assert plan.targets == max(plan.table, key=lambda r: r.score).dims
        assert plan.targets == {"low": 8, "high": 120}

    def test_table_lists_every_feasible_combination(self, make_embedding):
        embeddings = {"a": make_embedding(30, 6, model_id="a"), "b": make_embedding(30, 6, model_id="b")}

        plan = search_rates(embeddings, {"a": [1, 2, 3], "b": [3, 2, 1]}, 4, k_clusters=3, seed=0)

        assert [row.dims for row in plan.table] == [
            {"a": 1, "b": 3}, {"a": 2, "b": 2}, {"a": 3, "b": 1}
        ]
        assert plan.score == max(row.score for row in plan.table)
        assert sum(plan.targets.values()) == 4

    def test_deterministic(self, make_embedding):
        embeddings = {"a": make_embedding(30, 6, model_id="a"), "b": make_embedding(30, 6, model_id="b")}
        candidates = {"a": [2, 4], "b": [2, 4]}

        first = search_rates(embeddings, candidates, 6, k_clusters=3, seed=4)
        second = search_rates(embeddings, candidates, 6, k_clusters=3, seed=4)

        assert first.to_json_dict() == second.to_json_dict()

    def test_infeasible_budget(self, make_embedding):
        with pytest.raises(InfeasiblePlanError) as exc:
            search_rates({"a": make_embedding(20, 4)}, {"a": [1, 2]}, 10, k_clusters=3, seed=0)
        assert exc.value.code == "infeasible_plan"

    def test_candidate_without_embeddings(self, make_embedding):
        with pytest.raises(MissingSlotError) as exc:
            search_rates({}, {"a": [2]}, 2, k_clusters=3, seed=0)
        assert exc.value.code == "missing_slot:a"
