"""Structural similarity (SSIM) over Gaussian-windowed local statistics.

Local means, variances, and covariance are taken under a normalized Gaussian
window at every position where the window fits entirely inside the image
(valid mode, the reference convention); the per-window index

    (2 mu_x mu_y + C1)(2 cov_xy + C2)
    ---------------------------------
    (mu_x^2 + mu_y^2 + C1)(var_x + var_y + C2)

is averaged over positions and channels.  Identical inputs score exactly 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tryonkit.raster import RasterImage

__all__ = ["SsimParams", "ssim"]


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    sigma: float = 1.5

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.dynamic_range <= 0:
            raise ValueError(f"dynamic_range must be positive, got {self.dynamic_range}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel (sums to 1)."""
    offsets = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _local_stats(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    windows = sliding_window_view(plane, kernel.shape)
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def ssim(a: RasterImage, b: RasterImage, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM between two images; symmetric, and ssim(a, a) == 1.0."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"images must share dimensions, got {a.data.shape[:2]} and {b.data.shape[:2]}"
        )
    if params.window > min(a.height, a.width):
        raise ValueError(
            f"window {params.window} exceeds image dimensions ({a.height}, {a.width})"
        )

    kernel = gaussian_window(params.window, params.sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2

    values = []
    for c in range(3):
        x = a.data[:, :, c]
        y = b.data[:, :, c]
        mu_x = _local_stats(x, kernel)
        mu_y = _local_stats(y, kernel)
        var_x = _local_stats(x * x, kernel) - mu_x * mu_x
        var_y = _local_stats(y * y, kernel) - mu_y * mu_y
        cov_xy = _local_stats(x * y, kernel) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        values.append(num / den)
    return float(np.mean(values))
