"""PSNR and SSIM on packed RAW in the normalized [0, 1] domain."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """``10 log10(1 / MSE)`` with peak 1; identical inputs give ``inf``."""
    a, b = _same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE ** 2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = taps.size
    x = sliding_window_view(x, n, axis=0) @ taps
    return sliding_window_view(x, n, axis=1) @ taps


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM over every fully-contained 11x11 window, per channel.

    Inputs are ``(H, W)`` or ``(H, W, C)``; the result has shape
    ``(H - 10, W - 10, C)``.
    """
    a, b = _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.ndim != 3:
        raise DimensionError(f"expected (H, W) or (H, W, C) arrays, got {a.shape}")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise DimensionError(
            f"SSIM needs both spatial sides >= {SSIM_WINDOW}, got {a.shape[:2]}")
    taps = gaussian_window()
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b) -> float:
    """Mean SSIM per channel, averaged over channels (Gaussian 11x11, sigma 1.5)."""
    smap = ssim_map(a, b)
    per_channel = smap.reshape(-1, smap.shape[-1]).mean(axis=0)
    return float(per_channel.mean())
