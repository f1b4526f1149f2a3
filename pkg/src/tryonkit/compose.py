"""Hybrid input formation: overlay a preprocessed garment onto an agnostic person.

The composed image keeps the preserved person region and fills part of the
removed region with the preprocessed warped garment,

    I_in = I_a + (1 - M_a) * C_w        M_in = M_a + (1 - M_a) * M_w,

which is literal elementwise arithmetic because the agnostic image is zero
outside its keep mask and the garment is zero outside its own mask.  Masks
are resized to latent resolution by exact area averaging plus thresholding,
and a deterministic block-mean downsampler stands in for a learned latent
encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tryonkit.raster import BinaryMask, RasterImage, SegmentationMap

__all__ = [
    "AgnosticPerson",
    "ComposedInput",
    "DenoiserInputStack",
    "make_agnostic",
    "compose_input",
    "resize_mask",
    "block_mean",
    "encode_stub",
    "encode_segmentation",
    "assemble_stack",
]


def _first_nonzero_coord(arr2d: np.ndarray) -> tuple[int, int]:
    idx = np.argwhere(arr2d)
    i, j = idx[0]
    return int(i), int(j)


@dataclass(frozen=True)
class AgnosticPerson:
    """Person image with the garment region removed (zero-filled)."""

    image: RasterImage
    keep_mask: BinaryMask

    def __post_init__(self) -> None:
        if (self.image.height, self.image.width) != (self.keep_mask.height, self.keep_mask.width):
            raise ValueError(
                f"agnostic image {self.image.data.shape[:2]} and keep mask "
                f"{self.keep_mask.data.shape} must share dimensions"
            )
        removed = self.image.data * (1 - self.keep_mask.data)[:, :, None]
        if np.any(removed != 0):
            i, j = _first_nonzero_coord(np.any(removed != 0, axis=2))
            raise ValueError(
                f"agnostic image must be zero outside the keep mask; "
                f"first nonzero removed-region sample at pixel ({i}, {j})"
            )


def make_agnostic(image: RasterImage, keep_mask: BinaryMask) -> AgnosticPerson:
    """Zero the removed region, converting gray-filled agnostic images."""
    if (image.height, image.width) != (keep_mask.height, keep_mask.width):
        raise ValueError("image and keep mask must share dimensions")
    return AgnosticPerson(
        RasterImage(image.data * keep_mask.data[:, :, None]), keep_mask
    )


@dataclass(frozen=True)
class ComposedInput:
    """Composed inpainting input: image, its validity mask, and the garment mask."""

    image: RasterImage
    mask: BinaryMask
    warped_mask: BinaryMask

    def __post_init__(self) -> None:
        shapes = {
            self.image.data.shape[:2],
            self.mask.data.shape,
            self.warped_mask.data.shape,
        }
        if len(shapes) > 1:
            raise ValueError(f"composed input fields must share dimensions, got {shapes}")
        outside = self.image.data * (1 - self.mask.data)[:, :, None]
        if np.any(outside != 0):
            i, j = _first_nonzero_coord(np.any(outside != 0, axis=2))
            raise ValueError(
                f"composed image must be zero where its mask is zero; "
                f"first violation at pixel ({i}, {j})"
            )


def compose_input(
    agnostic: AgnosticPerson, warped: RasterImage, warped_mask: BinaryMask
) -> ComposedInput:
    """Overlay the preprocessed garment onto the agnostic person.

    Rejects garments that are nonzero outside their mask instead of silently
    masking them; the error names the first offending pixel.
    """
    shapes = {
        (agnostic.image.height, agnostic.image.width),
        (warped.height, warped.width),
        (warped_mask.height, warped_mask.width),
    }
    if len(shapes) > 1:
        raise ValueError(f"compose inputs must share dimensions, got {shapes}")
    stray = warped.data * (1 - warped_mask.data)[:, :, None]
    if np.any(stray != 0):
        i, j = _first_nonzero_coord(np.any(stray != 0, axis=2))
        raise ValueError(
            f"warped garment must be zero outside its mask; "
            f"first violation at pixel ({i}, {j})"
        )

    keep = agnostic.keep_mask.data
    inverse = (1 - keep).astype(np.float64)
    image = agnostic.image.data + inverse[:, :, None] * warped.data
    mask = keep + (1 - keep) * warped_mask.data
    return ComposedInput(RasterImage(image), BinaryMask(mask), warped_mask)


def _overlap_weights(n_src: int, n_dst: int) -> np.ndarray:
    """Row-stochastic (n_dst, n_src) matrix of exact cell-overlap fractions."""
    scale = n_src / n_dst
    weights = np.zeros((n_dst, n_src), dtype=np.float64)
    for i in range(n_dst):
        start = i * scale
        end = (i + 1) * scale
        j0 = int(np.floor(start))
        j1 = min(int(np.ceil(end)), n_src)
        for j in range(j0, j1):
            overlap = min(end, j + 1) - max(start, j)
            if overlap > 0:
                weights[i, j] = overlap / scale
    return weights


def resize_mask(
    mask: BinaryMask, target_h: int, target_w: int, threshold: float = 0.5
) -> BinaryMask:
    """Area-average the mask onto the target grid, then threshold at >= threshold.

    A same-size call is the identity; ties at exactly the threshold map to 1.
    """
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target dimensions must be >= 1, got ({target_h}, {target_w})")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if (target_h, target_w) == (mask.height, mask.width):
        return mask
    rows = _overlap_weights(mask.height, target_h)
    cols = _overlap_weights(mask.width, target_w)
    coverage = rows @ mask.data.astype(np.float64) @ cols.T
    return BinaryMask((coverage >= threshold).astype(np.uint8))


def block_mean(arr: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping factor x factor blocks of the leading two axes."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    h, w = arr.shape[:2]
    if h % factor or w % factor:
        raise ValueError(
            f"factor {factor} must divide dimensions ({h}, {w}); pad to a multiple first"
        )
    shape = (h // factor, factor, w // factor, factor) + arr.shape[2:]
    return arr.reshape(shape).mean(axis=(1, 3))


def encode_stub(img: RasterImage, factor: int) -> np.ndarray:
    """Deterministic latent-encoder stand-in: per-channel block-mean downsampling.

    Returns a channels-first (3, H/factor, W/factor) array.  Linear, so
    encoding commutes with pixelwise addition.
    """
    return np.ascontiguousarray(block_mean(img.data, factor).transpose(2, 0, 1))


def encode_segmentation(
    seg: SegmentationMap, factor: int, num_labels: int | None = None
) -> np.ndarray:
    """One-hot the label raster, then block-mean each label plane.

    Returns (num_labels, H/factor, W/factor); plane values are per-block label
    coverage fractions.
    """
    if num_labels is None:
        num_labels = int(seg.data.max()) + 1
    if num_labels < 1 or seg.data.max() >= num_labels:
        raise ValueError(f"num_labels {num_labels} does not cover labels up to {seg.data.max()}")
    onehot = (seg.data[:, :, None] == np.arange(num_labels)).astype(np.float64)
    return np.ascontiguousarray(block_mean(onehot, factor).transpose(2, 0, 1))


@dataclass(frozen=True)
class DenoiserInputStack:
    """Everything the denoiser sees at one timestep, at latent resolution."""

    noisy_latent: np.ndarray
    encoded_input: np.ndarray
    resized_input_mask: BinaryMask
    resized_warped_mask: BinaryMask
    encoded_seg: np.ndarray
    timestep: int

    def __post_init__(self) -> None:
        spatial = {
            self.noisy_latent.shape[-2:],
            self.encoded_input.shape[-2:],
            self.resized_input_mask.data.shape,
            self.resized_warped_mask.data.shape,
            self.encoded_seg.shape[-2:],
        }
        if len(spatial) > 1:
            raise ValueError(f"latent planes must share spatial dimensions, got {spatial}")


def assemble_stack(
    composed: ComposedInput,
    seg: SegmentationMap,
    z_t: np.ndarray,
    t: int,
    factor: int,
    num_labels: int | None = None,
    threshold: float = 0.5,
) -> DenoiserInputStack:
    """Build the denoiser input stack from a composed input at timestep t."""
    h, w = composed.image.height, composed.image.width
    if (seg.height, seg.width) != (h, w):
        raise ValueError(
            f"segmentation {seg.data.shape} must match composed input ({h}, {w})"
        )
    if h % factor or w % factor:
        raise ValueError(f"factor {factor} must divide input dimensions ({h}, {w})")
    lat_h, lat_w = h // factor, w // factor
    if z_t.shape[-2:] != (lat_h, lat_w):
        raise ValueError(
            f"noisy latent spatial shape {z_t.shape[-2:]} must be ({lat_h}, {lat_w})"
        )
    return DenoiserInputStack(
        noisy_latent=z_t,
        encoded_input=encode_stub(composed.image, factor),
        resized_input_mask=resize_mask(composed.mask, lat_h, lat_w, threshold),
        resized_warped_mask=resize_mask(composed.warped_mask, lat_h, lat_w, threshold),
        encoded_seg=encode_segmentation(seg, factor, num_labels),
        timestep=int(t),
    )
