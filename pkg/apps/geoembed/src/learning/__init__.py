from .optimizer import GradientDescent, batch_indices
from .softmax import init_probe_weights, softmax_cross_entropy
