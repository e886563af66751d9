"""Thermal/RGB UAV image registration and fusion toolkit."""

from ._core import (
    apply_h,
    calibrate,
    detect,
    detect_and_describe,
    estimate_dlt,
    estimate_robust,
    gradient_magnitude,
    load_image,
    make_synthetic,
    mean_intensity,
    normalize_16_to_8,
    offset_gamma,
    optimize_weights,
    orientation,
    overlay,
    run_pair,
    save_image,
    to_grayscale,
    warp,
)

__all__ = [
    "apply_h",
    "calibrate",
    "detect",
    "detect_and_describe",
    "estimate_dlt",
    "estimate_robust",
    "gradient_magnitude",
    "load_image",
    "make_synthetic",
    "mean_intensity",
    "normalize_16_to_8",
    "offset_gamma",
    "optimize_weights",
    "orientation",
    "overlay",
    "run_pair",
    "save_image",
    "to_grayscale",
    "warp",
]
