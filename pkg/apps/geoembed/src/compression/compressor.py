"""Truncated SVD compression.

Inputs are NOT mean-centred unless `center=True` is requested. This follows
the TruncatedSVD convention; PCA-style centring changes the basis and the
reconstruction error, so the centred variant is opt-in and recorded on the
model.
"""
import logging
from typing import Optional

import numpy as np
import scipy.linalg

from geoembed_common.errors import DimensionMismatchError
from geoembed_common.store import EmbeddingMatrix

from .svd_models import EmptyMatrixError, KOutOfRangeError, SvdModel

logger = logging.getLogger(__name__)

EXACT_SVD_MAX_DIM = 256
N_OVERSAMPLES = 10
N_POWER_ITERATIONS = 2


def canonicalize_signs(components: np.ndarray) -> np.ndarray:
    """Flips each row so its first non-negligible entry is positive."""
    components = components.copy()
    for row in components:
        scale = np.max(np.abs(row))
        if scale == 0.0:
            continue
        first = np.flatnonzero(np.abs(row) > 1e-12 * scale)[0]
        if row[first] < 0:
            row *= -1.0
    return components


def _randomized_svd(a: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n, d = a.shape
    n_samples = min(k + N_OVERSAMPLES, n, d)
    rng = np.random.default_rng(seed)

    omega = rng.standard_normal((d, n_samples))
    q, _ = scipy.linalg.qr(a @ omega, mode="economic")
    for _ in range(N_POWER_ITERATIONS):
        w, _ = scipy.linalg.qr(a.T @ q, mode="economic")
        q, _ = scipy.linalg.qr(a @ w, mode="economic")

    _, s, vt = scipy.linalg.svd(q.T @ a, full_matrices=False)
    return s[:k], vt[:k]


def fit_truncated_svd(
    x: EmbeddingMatrix,
    k: int,
    seed: int,
    center: bool = False,
    exact_max_dim: int = EXACT_SVD_MAX_DIM,
) -> SvdModel:
    n, d = x.shape
    if n == 0 or d == 0:
        raise EmptyMatrixError(f"Cannot fit SVD on empty matrix '{x.model_id}' {x.shape}")
    if not 1 <= k <= min(n, d):
        raise KOutOfRangeError(
            f"k={k} out of range for '{x.model_id}' {x.shape}: need 1 <= k <= {min(n, d)}"
        )

    a = x.as_float64()
    mean = a.mean(axis=0) if center else None
    if mean is not None:
        a = a - mean

    if not np.any(a):
        logger.warning(f"'{x.model_id}' is all zeros; SVD model has zero singular values")
        singular_values = np.zeros(k)
        components = np.eye(k, d)
    elif min(n, d) <= exact_max_dim:
        _, s, vt = scipy.linalg.svd(a, full_matrices=False)
        singular_values, components = s[:k], vt[:k]
    else:
        singular_values, components = _randomized_svd(a, k, seed)

    singular_values = np.clip(singular_values, 0.0, None)
    model = SvdModel(
        components=canonicalize_signs(components),
        singular_values=singular_values,
        seed=seed,
        mean=mean,
        source_model_id=x.model_id,
    )
    logger.info(
        f"Fitted SVD for '{x.model_id}': {d} -> {k} dims "
        f"(top singular value {singular_values[0]:.4g}, centered={center})"
    )
    return model


def transform(model: SvdModel, x: EmbeddingMatrix) -> EmbeddingMatrix:
    if x.n_cols != model.input_dim:
        raise DimensionMismatchError(
            f"'{x.model_id}' has {x.n_cols} columns, SVD model expects {model.input_dim}"
        )
    a = x.as_float64()
    if model.mean is not None:
        a = a - model.mean
    return x.with_data(a @ model.components.T)


def reconstruct(model: SvdModel, z: EmbeddingMatrix) -> EmbeddingMatrix:
    if z.n_cols != model.target_dim:
        raise DimensionMismatchError(
            f"'{z.model_id}' has {z.n_cols} columns, SVD model has k={model.target_dim}"
        )
    x_hat = z.as_float64() @ model.components
    if model.mean is not None:
        x_hat = x_hat + model.mean
    return z.with_data(x_hat)


def reconstruction_mse(x: EmbeddingMatrix, x_hat: EmbeddingMatrix) -> float:
    if x.shape != x_hat.shape:
        raise DimensionMismatchError(f"Shape mismatch: {x.shape} vs {x_hat.shape}")
    if x.data.size == 0:
        return 0.0
    diff = x.as_float64() - x_hat.as_float64()
    return float(np.mean(diff * diff))


def explained_variance_ratio(model: SvdModel, x: EmbeddingMatrix) -> float:
    """Share of the (uncentred or centred) energy of x captured by the model."""
    a = x.as_float64()
    if model.mean is not None:
        a = a - model.mean
    total = float(np.sum(a * a))
    if total == 0.0:
        return 1.0
    projected = a @ model.components.T
    return float(np.sum(projected * projected) / total)


def compress(
    x: EmbeddingMatrix,
    k: int,
    seed: int,
    center: bool = False,
    model_id: Optional[str] = None,
) -> tuple[SvdModel, EmbeddingMatrix]:
    model = fit_truncated_svd(x, k, seed, center=center)
    z = transform(model, x)
    if model_id is not None:
        z = z.with_data(z.data, model_id=model_id)
    return model, z
