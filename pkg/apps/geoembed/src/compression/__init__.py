from .compressor import (
    compress,
    explained_variance_ratio,
    fit_truncated_svd,
    reconstruct,
    reconstruction_mse,
    transform,
)
from .svd_models import SvdModel, load_svd_model, save_svd_model
