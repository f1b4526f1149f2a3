"""Warped-garment preprocessing: torso extraction, erosion, bilateral filtering.

The three-step chain turns a warped garment and its mask into a cleaned
(garment, mask) pair: restrict to torso-labelled pixels, shrink the mask with
a minimum filter to drop boundary artifacts, then smooth the surviving region
with an edge-preserving bilateral filter whose range sigma depends on whether
we are preparing training targets or inference inputs.

All functions are pure; erosion uses a zero-padding convention so garments
touching the image border also shrink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tryonkit.raster import BinaryMask, RasterImage, SegmentationMap

__all__ = [
    "PreprocessConfig",
    "extract_torso",
    "erode_mask",
    "erode_garment",
    "bilateral_filter",
    "preprocess_warped_garment",
    "ground_truth_garment",
]

# DensePose part indices for the torso; overridable per deployment.
DEFAULT_TORSO_LABELS = frozenset({1, 2})


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters for the three-step preprocessing chain."""

    torso_labels: frozenset[int] = DEFAULT_TORSO_LABELS
    erosion_kernel: int = 21
    bilateral_kernel: int = 23
    sigma_d: float = 5.0
    sigma_r_train: float = 0.06
    sigma_r_infer: float = 0.01
    mode: str = "infer"

    def __post_init__(self) -> None:
        object.__setattr__(self, "torso_labels", frozenset(int(v) for v in self.torso_labels))
        if not self.torso_labels:
            raise ValueError("torso_labels must be non-empty")
        for name in ("erosion_kernel", "bilateral_kernel"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {k}")
        if self.sigma_d <= 0:
            raise ValueError(f"sigma_d must be positive, got {self.sigma_d}")
        if self.sigma_r_train <= 0 or self.sigma_r_infer <= 0:
            raise ValueError("sigma_r values must be positive")
        if self.mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {self.mode!r}")

    @property
    def sigma_r(self) -> float:
        """Range sigma selected by mode."""
        return self.sigma_r_train if self.mode == "train" else self.sigma_r_infer


def _check_same_shape(*shapes: tuple[int, int]) -> None:
    if len(set(shapes)) > 1:
        raise ValueError(f"inputs must share dimensions, got {shapes}")


def extract_torso(
    garment: RasterImage,
    mask: BinaryMask,
    seg: SegmentationMap,
    torso_labels: frozenset[int] | set[int],
) -> tuple[RasterImage, BinaryMask]:
    """Restrict a warped garment to torso-labelled pixels.

    The output mask is the input mask intersected with the torso region of the
    segmentation; the output image is zeroed outside it.
    """
    if not torso_labels:
        raise ValueError("torso_labels must be non-empty")
    _check_same_shape(
        (garment.height, garment.width), (mask.height, mask.width), (seg.height, seg.width)
    )
    torso = np.isin(seg.data, sorted(int(v) for v in torso_labels))
    out_mask = (mask.data.astype(bool) & torso).astype(np.uint8)
    out_img = garment.data * out_mask[:, :, None]
    return RasterImage(out_img), BinaryMask(out_mask)


def _min_filter_axis(arr: np.ndarray, kernel: int, axis: int) -> np.ndarray:
    """1-D sliding minimum with out-of-bounds samples treated as 0."""
    radius = kernel // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="constant", constant_values=0)
    n = arr.shape[axis]
    slices = []
    for off in range(kernel):
        idx = [slice(None), slice(None)]
        idx[axis] = slice(off, off + n)
        slices.append(padded[tuple(idx)])
    return np.minimum.reduce(slices)


def erode_mask(mask: BinaryMask, kernel: int) -> BinaryMask:
    """Minimum filter over a kernel x kernel window, zero-padded at borders.

    The square window makes the filter separable: a 1-D minimum along each
    axis in turn equals the 2-D window minimum exactly.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"erosion kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return mask
    out = _min_filter_axis(mask.data, kernel, axis=0)
    out = _min_filter_axis(out, kernel, axis=1)
    return BinaryMask(out)


def erode_garment(
    garment: RasterImage, mask: BinaryMask, kernel: int
) -> tuple[RasterImage, BinaryMask]:
    """Erode the mask, then zero the garment outside the eroded mask."""
    _check_same_shape((garment.height, garment.width), (mask.height, mask.width))
    eroded = erode_mask(mask, kernel)
    return RasterImage(garment.data * eroded.data[:, :, None]), eroded


def bilateral_filter(
    garment: RasterImage,
    mask: BinaryMask,
    kernel: int,
    sigma_d: float,
    sigma_r: float,
) -> RasterImage:
    """Edge-preserving smoothing restricted to in-mask support.

    For each in-mask pixel and each channel independently, neighbors inside
    the window contribute weight

        exp(-((i-k)^2 + (j-l)^2) / (2 sigma_d^2)
            - (I_c(i,j) - I_c(k,l))^2 / (2 sigma_r^2))

    if they lie inside the mask; weights are normalized to sum to 1 over the
    in-mask support.  Out-of-mask output pixels are 0.  The range term uses
    the center-vs-neighbor difference per channel, so the three channels are
    filtered with three independent kernels.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"bilateral kernel must be odd and >= 1, got {kernel}")
    if sigma_d <= 0 or sigma_r <= 0:
        raise ValueError(f"sigmas must be positive, got sigma_d={sigma_d}, sigma_r={sigma_r}")
    _check_same_shape((garment.height, garment.width), (mask.height, mask.width))

    h, w = mask.height, mask.width
    radius = kernel // 2
    img = garment.data
    m = mask.data.astype(np.float64)

    pad_img = np.zeros((h + 2 * radius, w + 2 * radius, 3), dtype=np.float64)
    pad_img[radius : radius + h, radius : radius + w] = img
    pad_m = np.zeros((h + 2 * radius, w + 2 * radius), dtype=np.float64)
    pad_m[radius : radius + h, radius : radius + w] = m

    inv_2sd2 = 1.0 / (2.0 * sigma_d * sigma_d)
    inv_2sr2 = 1.0 / (2.0 * sigma_r * sigma_r)

    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for di in range(kernel):
        for dj in range(kernel):
            neigh = pad_img[di : di + h, dj : dj + w]
            neigh_m = pad_m[di : di + h, dj : dj + w]
            spatial = np.exp(-((di - radius) ** 2 + (dj - radius) ** 2) * inv_2sd2)
            diff = img - neigh
            weight = spatial * np.exp(-(diff * diff) * inv_2sr2) * neigh_m[:, :, None]
            num += weight * neigh
            den += weight

    center = m[:, :, None]
    # In-mask centers always have den >= 1 (the center pixel contributes e^0).
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0) * center
    return RasterImage(np.clip(out, 0.0, 1.0))


def preprocess_warped_garment(
    garment: RasterImage,
    mask: BinaryMask,
    seg: SegmentationMap,
    cfg: PreprocessConfig,
) -> tuple[RasterImage, BinaryMask]:
    """Run the full chain: torso extraction, erosion, bilateral filtering."""
    torso_img, torso_mask = extract_torso(garment, mask, seg, cfg.torso_labels)
    eroded_img, eroded_mask = erode_garment(torso_img, torso_mask, cfg.erosion_kernel)
    filtered = bilateral_filter(
        eroded_img, eroded_mask, cfg.bilateral_kernel, cfg.sigma_d, cfg.sigma_r
    )
    return filtered, eroded_mask


def ground_truth_garment(
    person: RasterImage, garment_region: BinaryMask
) -> tuple[RasterImage, BinaryMask]:
    """Cut the garment region out of a person image.

    At training time the returned pair replaces the externally warped garment
    as input to ``preprocess_warped_garment``.
    """
    _check_same_shape((person.height, person.width), (garment_region.height, garment_region.width))
    return RasterImage(person.data * garment_region.data[:, :, None]), garment_region
