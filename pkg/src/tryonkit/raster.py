"""Core raster types and bit-exact 8-bit image I/O.

Images are real-valued in [0, 1] internally (H, W, 3 row-major), masks are
{0, 1}, segmentation maps are non-negative integer label rasters.  Files are
8-bit PNG at the boundary: loading divides by 255 exactly, saving rounds to
the nearest 8-bit level.  All types are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "RasterImage",
    "BinaryMask",
    "SegmentationMap",
    "load_image",
    "load_mask",
    "save_image",
    "save_mask",
    "load_segmentation",
    "save_segmentation",
    "atomic_write_bytes",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RasterImage:
    """H x W x 3 image with samples in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"image samples must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3


@dataclass(frozen=True)
class BinaryMask:
    """H x W mask with samples in {0, 1}."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask must have shape (H, W), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask dimensions must be positive, got {arr.shape}")
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError("mask samples must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(arr.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SegmentationMap:
    """H x W integer label raster; label 0 is background."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"segmentation must have shape (H, W), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"segmentation dimensions must be positive, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("segmentation labels must be integers")
        if arr.min() < 0:
            raise ValueError("segmentation labels must be >= 0")
        object.__setattr__(self, "data", _freeze(arr.astype(np.int32)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def labels(self) -> set[int]:
        return set(int(v) for v in np.unique(self.data))


def load_image(path: str | Path) -> RasterImage:
    """Load an 8-bit RGB raster; samples become v / 255 exactly."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    with Image.open(path) as img:
        if img.mode != "RGB":
            raise ValueError(f"expected an RGB image, got mode {img.mode!r}: {path}")
        arr = np.asarray(img, dtype=np.uint8)
    return RasterImage(arr.astype(np.float64) / 255.0)


def load_mask(path: str | Path, threshold: float = 0.5) -> BinaryMask:
    """Load an 8-bit grayscale raster, binarized at v / 255 >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such mask file: {path}")
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"expected a grayscale mask, got mode {img.mode!r}: {path}")
        arr = np.asarray(img, dtype=np.uint8)
    return BinaryMask((arr.astype(np.float64) / 255.0 >= threshold).astype(np.uint8))


def load_segmentation(path: str | Path) -> SegmentationMap:
    """Load an 8-bit grayscale raster as integer labels (byte value = label)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such segmentation file: {path}")
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"expected a grayscale label raster, got mode {img.mode!r}: {path}")
        arr = np.asarray(img, dtype=np.uint8)
    return SegmentationMap(arr)


def atomic_write_bytes(payload: bytes, path: str | Path) -> None:
    """Write bytes atomically (temp file in the target directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode_png(arr: np.ndarray, mode: str) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def save_image(img: RasterImage, path: str | Path) -> None:
    """Save as 8-bit RGB PNG with samples round(v * 255); write is atomic."""
    arr = np.round(img.data * 255.0).astype(np.uint8)
    atomic_write_bytes(_encode_png(arr, "RGB"), path)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Save a mask as 8-bit grayscale PNG, ones mapped to 255."""
    arr = (mask.data * np.uint8(255)).astype(np.uint8)
    atomic_write_bytes(_encode_png(arr, "L"), path)


def save_segmentation(seg: SegmentationMap, path: str | Path) -> None:
    """Save labels as 8-bit grayscale PNG (labels must fit a byte)."""
    if seg.data.max(initial=0) > 255:
        raise ValueError("segmentation labels exceed 8-bit range")
    atomic_write_bytes(_encode_png(seg.data.astype(np.uint8), "L"), path)
