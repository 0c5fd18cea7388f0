"""Python surface over the dehazing toolkit core.

Images are (H, W, 3) float64 numpy arrays in [0, 1]; depth maps are (H, W).
"""

from dehazekit._core import (
    Dataset,
    Model,
    apply_haze,
    evaluate,
    finetune,
    gaussian_baseline,
    generate_dataset,
    invert_haze,
    l0_attack,
    linf_attack,
    psnr,
    render_table,
    ssim,
    synth_clean_image,
    synth_depth,
    transmission,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Model",
    "apply_haze",
    "evaluate",
    "finetune",
    "gaussian_baseline",
    "generate_dataset",
    "invert_haze",
    "l0_attack",
    "linf_attack",
    "psnr",
    "render_table",
    "ssim",
    "synth_clean_image",
    "synth_depth",
    "transmission",
]
