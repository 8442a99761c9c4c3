import pytest
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from geoembed_common.store import EmbeddingMatrix, Manifest, ManifestEntry, save_embeddings

SEASONS = ["spring", "summer", "fall", "winter"]


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="function")
def make_embedding(rng) -> Callable[..., EmbeddingMatrix]:
    def _make(
        n_rows: int,
        n_cols: int,
        model_id: str = "model",
        with_row_ids: bool = True,
        season: Optional[str] = None,
        rank: Optional[int] = None,
    ) -> EmbeddingMatrix:
        if rank is None:
            data = rng.standard_normal((n_rows, n_cols))
        else:
            data = rng.standard_normal((n_rows, rank)) @ rng.standard_normal((rank, n_cols))
        row_ids = [f"s{i:05d}" for i in range(n_rows)] if with_row_ids else None
        return EmbeddingMatrix(data=data, model_id=model_id, row_ids=row_ids, season=season)

    return _make


@pytest.fixture(scope="function")
def write_embedding(tmp_path: Path) -> Callable[[EmbeddingMatrix, str], Path]:
    def _write(matrix: EmbeddingMatrix, name: str) -> Path:
        path = tmp_path / name
        save_embeddings(matrix, path)
        return path

    return _write


@pytest.fixture(scope="function")
def ensemble_manifest(tmp_path: Path, rng) -> Callable[[int], Path]:
    """Writes a synthetic seven-slot manifest with native encoder widths."""
    def _build(n_rows: int = 64, drop: Optional[List[str]] = None) -> Path:
        drop = drop or []
        row_ids = [f"s{i:05d}" for i in range(n_rows)]
        native: Dict[str, int] = {"convnext_xxl": 160, "vit_huge_clip": 288, "vit_base_dino": 144}
        entries = []
        for model_id, width in native.items():
            if model_id in drop:
                continue
            m = EmbeddingMatrix(
                data=rng.standard_normal((n_rows, width)),
                model_id=model_id,
                row_ids=row_ids,
            )
            path = tmp_path / "inputs" / f"{model_id}.emb"
            save_embeddings(m, path)
            entries.append(ManifestEntry(model_id=model_id, path=path))

        base = rng.standard_normal((n_rows, 128))
        for season in SEASONS:
            if f"georsclip_{season}" in drop:
                continue
            m = EmbeddingMatrix(
                data=base + 0.1 * rng.standard_normal((n_rows, 128)),
                model_id="georsclip",
                row_ids=row_ids,
                season=season,
            )
            path = tmp_path / "inputs" / f"georsclip_{season}.emb"
            save_embeddings(m, path)
            entries.append(ManifestEntry(model_id="georsclip", season=season, path=path))

        manifest_path = tmp_path / "inputs" / "manifest.json"
        Manifest(entries=entries).to_file(manifest_path)
        return manifest_path

    return _build
