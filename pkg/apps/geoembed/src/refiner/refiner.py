"""Unsupervised refinement of the seasonal GeoRSCLIP embeddings.

Pseudolabels come from agglomerative clustering of the four concatenated
seasons. A single square map W is applied to every season, the mapped
seasons are concatenated, and a bias-free softmax classifier P predicts the
pseudolabels. W and P are trained jointly; only W is kept.
"""
import logging
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from geoembed_common.errors import ConfigError, DimensionMismatchError
from geoembed_common.store import (
    EmbeddingMatrix,
    check_rows_aligned,
    concat_columns,
    l2_normalize_rows,
)
from clustering import agglomerative_cluster
from clustering.cluster_models import ClusterAssignment
from learning import GradientDescent, batch_indices, init_probe_weights, softmax_cross_entropy
from learning.softmax import check_labels

from .refiner_models import (
    SEASONS,
    LinearMap,
    ProbeWeights,
    RefinerConfig,
    RefinerError,
    RefinerState,
    TrainingDivergedError,
)

logger = logging.getLogger(__name__)

SeasonInput = Union[Sequence[EmbeddingMatrix], Mapping[str, EmbeddingMatrix]]

ILL_CONDITIONED_RATIO = 1e-8


def order_seasons(seasons: SeasonInput) -> list[EmbeddingMatrix]:
    """Returns the four seasons in spring, summer, fall, winter order."""
    if isinstance(seasons, Mapping):
        missing = [s for s in SEASONS if s not in seasons]
        if missing or len(seasons) != len(SEASONS):
            raise RefinerError(
                f"Expected seasons {list(SEASONS)}, got {sorted(seasons)}",
                code="season_count",
            )
        ordered = [seasons[s] for s in SEASONS]
    else:
        ordered = list(seasons)
        if len(ordered) != len(SEASONS):
            raise RefinerError(
                f"Expected {len(SEASONS)} season matrices, got {len(ordered)}",
                code="season_count",
            )

    widths = {m.n_cols for m in ordered}
    if len(widths) != 1:
        raise DimensionMismatchError(f"Season widths differ: {[m.n_cols for m in ordered]}")
    check_rows_aligned(ordered)
    return ordered


def _as_arrays(seasons: Sequence) -> list[np.ndarray]:
    arrays = [
        s.as_float64() if isinstance(s, EmbeddingMatrix) else np.asarray(s, dtype=np.float64)
        for s in seasons
    ]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 2:
        raise DimensionMismatchError(f"Season arrays must share one 2-D shape, got {shapes}")
    return arrays


def make_pseudolabels(
    seasons: SeasonInput,
    n_clusters: int,
    linkage: str = "ward",
    normalize: bool = False,
) -> ClusterAssignment:
    ordered = order_seasons(seasons)
    if normalize:
        ordered = [l2_normalize_rows(m) for m in ordered]
    joined = concat_columns(ordered, model_id="seasons_concat")
    assignment = agglomerative_cluster(joined, n_clusters, linkage=linkage)
    logger.info(
        f"Pseudolabels: {n_clusters} clusters ({linkage}) over {joined.shape}, "
        f"sizes min={assignment.cluster_sizes.min()} max={assignment.cluster_sizes.max()}"
    )
    return assignment


def _mapped_features(w: np.ndarray, xs: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([x @ w.T for x in xs], axis=1)


def _check_shapes(w: np.ndarray, p: np.ndarray, xs: Sequence[np.ndarray]) -> None:
    d = xs[0].shape[1]
    if w.shape != (d, d):
        raise DimensionMismatchError(f"Map is {w.shape}, seasons have {d} columns")
    if p.shape[1] != len(xs) * d:
        raise DimensionMismatchError(
            f"Probe width {p.shape[1]} != {len(xs)} seasons x {d} dims"
        )


def forward(linear_map: LinearMap, probe: ProbeWeights, seasons: Sequence) -> np.ndarray:
    """N x C logits. No bias is added anywhere."""
    xs = _as_arrays(seasons)
    _check_shapes(linear_map.w, probe.w, xs)
    return _mapped_features(linear_map.w, xs) @ probe.w.T


def _loss_and_grads(
    w: np.ndarray,
    p: np.ndarray,
    xs: Sequence[np.ndarray],
    labels: np.ndarray,
    l2: float,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    d = xs[0].shape[1]
    z = _mapped_features(w, xs)
    cross_entropy, dlogits = softmax_cross_entropy(z @ p.T, labels)
    loss = cross_entropy + l2 * (np.sum(w * w) + np.sum(p * p)) / 2.0

    grad_p = dlogits.T @ z + l2 * p
    dz = dlogits @ p
    grad_w = l2 * w
    # tied map: every season contributes
    for s, x in enumerate(xs):
        grad_w = grad_w + dz[:, s * d:(s + 1) * d].T @ x
    return float(loss), cross_entropy, grad_w, grad_p


def loss_and_grads(
    linear_map: LinearMap,
    probe: ProbeWeights,
    seasons: Sequence,
    labels,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy plus l2 * (|W|^2 + |P|^2) / 2 and exact gradients."""
    xs = _as_arrays(seasons)
    _check_shapes(linear_map.w, probe.w, xs)
    labels = check_labels(labels, probe.n_classes, xs[0].shape[0])
    loss, _, grad_w, grad_p = _loss_and_grads(linear_map.w, probe.w, xs, labels, l2)
    return loss, grad_w, grad_p


def map_conditioning(linear_map: LinearMap) -> float:
    """min/max singular value ratio of the map."""
    s = np.linalg.svd(linear_map.w, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def _holdout_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if fraction <= 0.0:
        return np.arange(n), np.arange(0)
    # separate stream so the split never perturbs init or shuffling
    order = np.random.default_rng([seed, 1]).permutation(n)
    n_holdout = max(1, int(round(fraction * n)))
    if n_holdout >= n:
        raise ConfigError(
            f"holdout_fraction={fraction} holds out {n_holdout} of {n} rows and leaves none to train on"
        )
    return np.sort(order[n_holdout:]), np.sort(order[:n_holdout])


def train_refiner(
    seasons: SeasonInput,
    labels: Union[ClusterAssignment, np.ndarray],
    cfg: RefinerConfig,
) -> RefinerState:
    xs = _as_arrays(order_seasons(seasons))
    n, d = xs[0].shape

    if isinstance(labels, ClusterAssignment):
        n_classes = labels.n_clusters
        labels = labels.labels
    else:
        n_classes = int(np.max(labels)) + 1
    labels = check_labels(labels, n_classes, n)

    train_idx, holdout_idx = _holdout_split(n, cfg.holdout_fraction, cfg.seed)
    train_xs = [x[train_idx] for x in xs]
    train_labels = labels[train_idx]

    rng = np.random.default_rng(cfg.seed)
    w = np.eye(d)
    p = init_probe_weights(rng, n_classes, len(xs) * d, cfg.init_scale)
    optimizer = GradientDescent(cfg.learning_rate, cfg.momentum)

    loss_trace: list[float] = []
    holdout_trace: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        for idx in batch_indices(len(train_idx), cfg.batch_size, rng):
            _, cross_entropy, grad_w, grad_p = _loss_and_grads(
                w, p, [x[idx] for x in train_xs], train_labels[idx], cfg.l2_penalty
            )
            if not (np.isfinite(cross_entropy) and np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_p))):
                logger.error(f"Refiner diverged at epoch {epoch} (loss={cross_entropy})")
                raise TrainingDivergedError(
                    f"Non-finite loss or gradient at epoch {epoch}; "
                    f"lower learning_rate (now {cfg.learning_rate}) or raise l2_penalty"
                )
            epoch_loss += cross_entropy * len(idx)
            p = optimizer.step("probe", p, grad_p)
            if not cfg.freeze_map:
                w = optimizer.step("map", w, grad_w)

        loss_trace.append(epoch_loss / len(train_idx))
        if len(holdout_idx):
            logits = _mapped_features(w, [x[holdout_idx] for x in xs]) @ p.T
            holdout_trace.append(softmax_cross_entropy(logits, labels[holdout_idx])[0])

    linear_map = LinearMap(w=w, init_scheme="identity")
    conditioning = map_conditioning(linear_map)
    if conditioning < ILL_CONDITIONED_RATIO:
        logger.warning(f"Trained map is near-singular (min/max singular ratio {conditioning:.3e})")
    logger.info(
        f"Refiner trained {cfg.epochs} epochs: loss {loss_trace[0]:.4f} -> {loss_trace[-1]:.4f}, "
        f"map conditioning {conditioning:.3e}"
    )

    return RefinerState(
        map=linear_map,
        probe=ProbeWeights(w=p),
        loss_trace=tuple(loss_trace),
        holdout_trace=tuple(holdout_trace),
        conditioning=conditioning,
        config=cfg,
    )


def apply_linear_map(linear_map: LinearMap, x: EmbeddingMatrix) -> EmbeddingMatrix:
    if x.n_cols != linear_map.dim:
        raise DimensionMismatchError(
            f"'{x.model_id}' has {x.n_cols} columns, map is {linear_map.dim} x {linear_map.dim}"
        )
    return x.with_data(x.as_float64() @ linear_map.w.T)


def refine_seasons(
    seasons: SeasonInput,
    cfg: RefinerConfig,
    labels: Optional[ClusterAssignment] = None,
) -> tuple[RefinerState, ClusterAssignment, list[EmbeddingMatrix]]:
    """Pseudolabels -> joint training -> the trained map applied to each season."""
    ordered = order_seasons(seasons)
    if labels is None:
        labels = make_pseudolabels(
            ordered,
            cfg.n_pseudo_clusters,
            linkage=cfg.linkage,
            normalize=cfg.normalize_before_clustering,
        )
    state = train_refiner(ordered, labels, cfg)
    refined = [apply_linear_map(state.map, m) for m in ordered]
    return state, labels, refined
