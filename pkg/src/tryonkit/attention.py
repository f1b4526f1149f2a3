"""Cross-attention with masked norm adjustment of the output feature map.

Where an explicitly placed garment already occupies the input, the
cross-attention contribution is scaled down inside that region:

    out = (1 - alpha * mask) * attn

with a learnable per-layer scalar alpha broadcast over channels.  Ablation
modes disable the adjustment entirely or pin alpha to 1 (which zeroes the
attention output inside the mask).  The analytic alpha gradient is provided
for optimizer integration and is verified against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tryonkit.raster import BinaryMask

__all__ = [
    "ADJUST_MODES",
    "AttentionLayerState",
    "FeatureMap",
    "cross_attention",
    "adjust_attention",
    "alpha_gradient",
]

ADJUST_MODES = ("full", "no_adjustment", "alpha_fixed_one")


@dataclass(frozen=True)
class FeatureMap:
    """Channels-first (C, H, W) real-valued feature map."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"feature map must have shape (C, H, W), got {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"feature map dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature map contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class AttentionLayerState:
    """Per-layer adjustment state: scalar alpha, layer dims, and ablation mode."""

    alpha: float = 0.5
    channels: int = 1
    height: int = 1
    width: int = 1
    mode: str = "full"

    def __post_init__(self) -> None:
        if self.mode not in ADJUST_MODES:
            raise ValueError(f"mode must be one of {ADJUST_MODES}, got {self.mode!r}")
        if min(self.channels, self.height, self.width) < 1:
            raise ValueError("layer dimensions must be positive")
        if not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")
        if self.mode == "alpha_fixed_one":
            object.__setattr__(self, "alpha", 1.0)

    @property
    def trainable(self) -> bool:
        return self.mode == "full"


def cross_attention(
    queries: FeatureMap, keys: np.ndarray, values: np.ndarray, dim: int
) -> FeatureMap:
    """Scaled dot-product attention over the flattened feature map.

    Query tokens are the h*w spatial positions with channel vectors as
    features; every output token is a convex combination of value tokens.
    """
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if keys.ndim != 2 or values.ndim != 2:
        raise ValueError("keys and values must be (tokens, dim) arrays")
    if keys.shape[0] != values.shape[0]:
        raise ValueError(
            f"key count {keys.shape[0]} must equal value count {values.shape[0]}"
        )
    if keys.shape[1] != dim or values.shape[1] != dim or queries.channels != dim:
        raise ValueError(
            f"token width mismatch: queries {queries.channels}, keys {keys.shape[1]}, "
            f"values {values.shape[1]}, dim {dim}"
        )

    c, h, w = queries.channels, queries.height, queries.width
    q = queries.data.reshape(c, h * w).T
    scores = q @ keys.T / np.sqrt(dim)
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    out = weights @ values
    return FeatureMap(out.reshape(h, w, c).transpose(2, 0, 1))


def _check_adjust_shapes(attn: FeatureMap, mask: BinaryMask) -> None:
    if (attn.height, attn.width) != (mask.height, mask.width):
        raise ValueError(
            f"mask shape {mask.data.shape} must match feature map spatial shape "
            f"({attn.height}, {attn.width})"
        )


def adjust_attention(
    attn: FeatureMap, warped_mask_resized: BinaryMask, state: AttentionLayerState
) -> FeatureMap:
    """Scale the attention output by (1 - alpha * mask), broadcast over channels."""
    _check_adjust_shapes(attn, warped_mask_resized)
    if state.mode == "no_adjustment":
        return attn
    scale = 1.0 - state.alpha * warped_mask_resized.data.astype(np.float64)
    return FeatureMap(scale[None, :, :] * attn.data)


def alpha_gradient(
    attn: FeatureMap, warped_mask_resized: BinaryMask, upstream: FeatureMap
) -> float:
    """d<upstream, adjust_attention(attn)>/d alpha = -sum(upstream * mask * attn)."""
    _check_adjust_shapes(attn, warped_mask_resized)
    if upstream.data.shape != attn.data.shape:
        raise ValueError(
            f"upstream shape {upstream.data.shape} must match feature map {attn.data.shape}"
        )
    m = warped_mask_resized.data.astype(np.float64)[None, :, :]
    return float(-(upstream.data * m * attn.data).sum())
