"""Grey-level mathematical morphology engine."""
from .operators import (
    CROSS4,
    SQUARE8,
    StructuringElement,
    area_opening,
    border_pixels,
    dilate,
    erode,
    fill,
    fill_top_hat,
    gradient,
    h_maxima,
    quasi_flat_zones,
    reconstruct_by_dilation,
    reconstruct_by_erosion,
    regional_maxima,
    watershed,
)

__all__ = [
    "CROSS4",
    "SQUARE8",
    "StructuringElement",
    "area_opening",
    "border_pixels",
    "dilate",
    "erode",
    "fill",
    "fill_top_hat",
    "gradient",
    "h_maxima",
    "quasi_flat_zones",
    "reconstruct_by_dilation",
    "reconstruct_by_erosion",
    "regional_maxima",
    "watershed",
]
