"""Toolkit for hybrid virtual try-on pipelines.

Provides the warped-garment preprocessing chain (torso extraction, mask
erosion, masked bilateral filtering), hybrid input composition for
inpainting-style generation, masked cross-attention norm adjustment,
deterministic diffusion sampling numerics (PLMS with a partial-noising
start), and an SSIM metric for regression checks.
"""

from tryonkit.raster import BinaryMask, RasterImage, SegmentationMap, load_image, load_mask, save_image
from tryonkit.preprocess import (
    PreprocessConfig,
    bilateral_filter,
    erode_garment,
    erode_mask,
    extract_torso,
    ground_truth_garment,
    preprocess_warped_garment,
)
from tryonkit.compose import (
    AgnosticPerson,
    ComposedInput,
    DenoiserInputStack,
    assemble_stack,
    compose_input,
    encode_stub,
    make_agnostic,
    resize_mask,
)
from tryonkit.attention import (
    AttentionLayerState,
    FeatureMap,
    adjust_attention,
    alpha_gradient,
    cross_attention,
)
from tryonkit.diffusion import (
    NoiseSchedule,
    forward_diffuse,
    make_linear_schedule,
    plms_sample,
    sdedit_init,
)
from tryonkit.metrics import SsimParams, ssim

__all__ = [
    "AgnosticPerson",
    "AttentionLayerState",
    "BinaryMask",
    "ComposedInput",
    "DenoiserInputStack",
    "FeatureMap",
    "NoiseSchedule",
    "PreprocessConfig",
    "RasterImage",
    "SegmentationMap",
    "SsimParams",
    "adjust_attention",
    "alpha_gradient",
    "assemble_stack",
    "bilateral_filter",
    "compose_input",
    "cross_attention",
    "encode_stub",
    "erode_garment",
    "erode_mask",
    "extract_torso",
    "forward_diffuse",
    "ground_truth_garment",
    "load_image",
    "load_mask",
    "make_agnostic",
    "make_linear_schedule",
    "plms_sample",
    "preprocess_warped_garment",
    "resize_mask",
    "save_image",
    "sdedit_init",
    "ssim",
]

__version__ = "0.1.0"
