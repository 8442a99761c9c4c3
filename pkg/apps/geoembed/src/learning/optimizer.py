from typing import Dict, List, Optional

import numpy as np


class GradientDescent:
    """Fixed learning-rate gradient descent with optional heavy-ball momentum."""

    def __init__(self, learning_rate: float, momentum: float = 0.0):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity: Dict[str, np.ndarray] = {}

    def step(self, name: str, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.momentum == 0.0:
            return param - self.learning_rate * grad

        velocity = self._velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(param)
        velocity = self.momentum * velocity - self.learning_rate * grad
        self._velocity[name] = velocity
        return param + velocity


def batch_indices(
    n_rows: int,
    batch_size: Optional[int],
    rng: np.random.Generator,
) -> List[np.ndarray]:
    """Full batch in row order, or seeded shuffled mini-batches."""
    if batch_size is None or batch_size >= n_rows:
        return [np.arange(n_rows)]
    order = rng.permutation(n_rows)
    return [order[i:i + batch_size] for i in range(0, n_rows, batch_size)]
