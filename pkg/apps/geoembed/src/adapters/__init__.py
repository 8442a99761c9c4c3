from .captions import (
    CaptionConfig,
    captions_for_metadata,
    format_latlon_caption,
    format_regression_caption,
)
from .conv_weights import (
    AdapterError,
    ConvWeight,
    expand_first_layer_channels,
    load_conv_weight,
    preserve_sum_mismatch,
    save_conv_weight,
)
