"""Bias-free probes: ridge least squares and multinomial logistic regression.

Neither model has an intercept, matching the downstream test-time setup.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from geoembed_common.errors import DimensionMismatchError
from geoembed_common.store import EmbeddingMatrix
from learning import GradientDescent, batch_indices, init_probe_weights, softmax_cross_entropy
from learning.softmax import check_labels
from refiner.refiner_models import ProbeWeights

from .evaluation_models import EvaluationError, SingularSystemError

logger = logging.getLogger(__name__)

Features = Union[EmbeddingMatrix, np.ndarray]


def _features(x: Features) -> np.ndarray:
    if isinstance(x, EmbeddingMatrix):
        return x.as_float64()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError(f"Features must be 2-D, got shape {x.shape}")
    return x


def fit_linear_probe_no_bias(x: Features, y, ridge: float = 0.0) -> np.ndarray:
    """w = (X^T X + ridge * I)^-1 X^T y, solved in float64."""
    a = _features(x)
    y = np.asarray(y, dtype=np.float64)
    if a.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{a.shape[0]} feature rows but {y.shape[0]} targets")
    if ridge < 0:
        raise EvaluationError(f"ridge must be >= 0, got {ridge}")

    gram = a.T @ a + ridge * np.eye(a.shape[1])
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularSystemError(
            f"X^T X + {ridge} I is singular ({a.shape[1]} features); use ridge > 0"
        )
    return scipy.linalg.solve(gram, a.T @ y, assume_a="pos")


def fit_linear_probe_gd(
    x: Features,
    y,
    ridge: float = 0.0,
    iters: int = 5000,
    learning_rate: Optional[float] = None,
) -> np.ndarray:
    """Gradient descent on 1/2 |Xw - y|^2 + ridge/2 |w|^2 from w = 0."""
    a = _features(x)
    y = np.asarray(y, dtype=np.float64)
    if learning_rate is None:
        # 1 / Lipschitz constant of the gradient
        learning_rate = 1.0 / (np.linalg.norm(a, 2) ** 2 + ridge)
    optimizer = GradientDescent(learning_rate)
    w = np.zeros((a.shape[1],) + y.shape[1:])
    for _ in range(iters):
        w = optimizer.step("w", w, a.T @ (a @ w - y) + ridge * w)
    return w


def predict_linear(x: Features, w: np.ndarray) -> np.ndarray:
    return _features(x) @ w


@dataclass(frozen=True)
class LogisticProbeFit:
    weights: ProbeWeights
    loss_trace: Tuple[float, ...]

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


def fit_logistic_probe_no_bias(
    x: Features,
    y,
    ridge: float = 1e-4,
    iters: int = 500,
    learning_rate: float = 1e-2,
    seed: int = 0,
    momentum: float = 0.0,
    batch_size: Optional[int] = None,
    init_scale: float = 1e-2,
    n_classes: Optional[int] = None,
) -> LogisticProbeFit:
    """Multinomial logistic regression without intercept by gradient descent.

    Uses the same seeded init, batching and update rule as the refiner's
    probe, so a refiner with a frozen identity map retraces this fit.
    """
    a = _features(x)
    y = np.asarray(y)
    if n_classes is None:
        n_classes = int(y.max()) + 1 if y.size else 0
    labels = check_labels(y, n_classes, a.shape[0])
    if len(np.unique(labels)) < 2:
        raise EvaluationError("Logistic probe needs at least two classes", code="single_class")

    rng = np.random.default_rng(seed)
    p = init_probe_weights(rng, n_classes, a.shape[1], init_scale)
    optimizer = GradientDescent(learning_rate, momentum)

    loss_trace = []
    n = a.shape[0]
    for _ in range(iters):
        epoch_loss = 0.0
        for idx in batch_indices(n, batch_size, rng):
            z = a[idx]
            cross_entropy, dlogits = softmax_cross_entropy(z @ p.T, labels[idx])
            epoch_loss += cross_entropy * len(idx)
            p = optimizer.step("probe", p, dlogits.T @ z + ridge * p)
        loss_trace.append(epoch_loss / n)

    logger.debug(f"Logistic probe: {n_classes} classes, loss {loss_trace[0]:.4f} -> {loss_trace[-1]:.4f}")
    return LogisticProbeFit(weights=ProbeWeights(w=p), loss_trace=tuple(loss_trace))


def predict_classes(x: Features, probe: ProbeWeights) -> np.ndarray:
    return np.argmax(_features(x) @ probe.w.T, axis=1)
