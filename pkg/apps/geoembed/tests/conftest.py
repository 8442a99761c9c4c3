import json
from pathlib import Path
from typing import Callable, Dict

import numpy as np
import pytest

from geoembed_common.store import EmbeddingMatrix

pytest_plugins = ["geoembed_common.store.tests.conftest"]


@pytest.fixture
def blob_data() -> Callable[..., tuple]:
    """Well-separated Gaussian blobs: (points, generating labels)."""
    def _make(n_per: int = 10, centers=None, spread: float = 0.1, seed: int = 0):
        rng = np.random.default_rng(seed)
        if centers is None:
            centers = [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0)]
        centers = np.asarray(centers, dtype=float)
        points = np.concatenate([c + spread * rng.standard_normal((n_per, centers.shape[1])) for c in centers])
        labels = np.repeat(np.arange(len(centers)), n_per)
        return points, labels

    return _make


@pytest.fixture
def separable_seasons() -> Callable[..., tuple]:
    """Four aligned seasons whose rows sit near 3 * e_c for their class c."""
    def _make(n: int = 60, d: int = 6, n_classes: int = 3, noise: float = 0.1, seed: int = 0):
        rng = np.random.default_rng(seed)
        labels = np.arange(n) % n_classes
        base = 3.0 * np.eye(d)[labels]
        seasons = {
            season: EmbeddingMatrix(
                data=base + noise * rng.standard_normal((n, d)),
                model_id="georsclip",
                season=season,
            )
            for season in ("spring", "summer", "fall", "winter")
        }
        return seasons, labels

    return _make


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[Dict, str], Path]:
    def _write(payload: Dict, name: str) -> Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def read_json() -> Callable[[Path], Dict]:
    def _read(path: Path) -> Dict:
        return json.loads(Path(path).read_text(encoding="utf-8"))

    return _read
