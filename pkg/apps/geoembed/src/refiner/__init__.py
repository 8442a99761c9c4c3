from .map_io import load_linear_map, save_linear_map, write_loss_trace
from .refiner import (
    apply_linear_map,
    forward,
    loss_and_grads,
    make_pseudolabels,
    map_conditioning,
    refine_seasons,
    train_refiner,
)
from .refiner_models import SEASONS, LinearMap, ProbeWeights, RefinerConfig, RefinerState
