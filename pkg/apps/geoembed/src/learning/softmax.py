import numpy as np

from geoembed_common.errors import GeoEmbedError


class LabelError(GeoEmbedError):
    code = "label_out_of_range"


def check_labels(labels: np.ndarray, n_classes: int, n_rows: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise LabelError(f"Expected {n_rows} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise LabelError(f"Labels must be integer class indices, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelError(
            f"Labels must lie in [0, {n_classes}), got range [{labels.min()}, {labels.max()}]"
        )
    return labels.astype(np.int64)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    log_p = log_softmax(logits)
    loss = -float(np.mean(log_p[np.arange(n), labels]))

    dlogits = np.exp(log_p)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def init_probe_weights(
    rng: np.random.Generator,
    n_classes: int,
    width: int,
    scale: float,
) -> np.ndarray:
    if scale == 0.0:
        return np.zeros((n_classes, width))
    return rng.uniform(-scale, scale, size=(n_classes, width))
