from .composer import MissingSlotError, compose, slice_slot
from .layout import (
    EnsembleLayout,
    LayoutError,
    Slot,
    default_layout,
    layout_from_widths,
    resolve_layout,
    with_widths,
)
from .rate_search import CompressionPlan, InfeasiblePlanError, search_rates
