"""Geometry-aware importance maps.

Per frame, two cues are fused into one per-token score in [0, 1]:

* a gradient map: Sobel gradient magnitude of the grayscale pixels, averaged
  over each patch (edges, texture boundaries);
* a variance map: local 3x3 variance of the mean-projected token features
  (semantic variability across neighboring tokens).

Both maps are min-max normalized and combined as
``alpha * norm(grad) + beta * norm(var)``, then rescaled to [0, 1].
High scores mark tokens worth protecting from merging; low scores mark
smooth regions that merge cheaply.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .ingest import ImageFrame, GrayImage, TokenGrid, to_grayscale
from .netpbm import write_pgm

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T

DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.5


@dataclass(frozen=True)
class GradMap:
    """Per-token mean gradient magnitude, (h_t, w_t), nonnegative."""

    values: np.ndarray


@dataclass(frozen=True)
class VarMap:
    """Per-token local feature variance, (h_t, w_t), clamped to >= 0."""

    values: np.ndarray


@dataclass(frozen=True)
class GaMap:
    """Fused per-token importance in [0, 1] with the fusion weights used."""

    values: np.ndarray
    alpha: float
    beta: float

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.values.shape


def sobel_gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical Sobel responses with replicate-padded borders."""
    intensity = img.intensity
    if intensity.shape[0] < 3 or intensity.shape[1] < 3:
        raise ValueError(f"image {intensity.shape} too small for a 3x3 kernel")
    gx = ndimage.correlate(intensity, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(intensity, SOBEL_Y, mode="nearest")
    return gx, gy


def gradient_magnitude(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Elementwise Euclidean norm sqrt(gx^2 + gy^2)."""
    if gx.shape != gy.shape:
        raise ValueError(f"gradient shapes differ: {gx.shape} vs {gy.shape}")
    return np.hypot(gx, gy)


def downsample_to_tokens(values: np.ndarray, patch_size: int) -> GradMap:
    """Average a pixel map over each patch, yielding one value per token."""
    h, w = values.shape
    if h % patch_size or w % patch_size:
        raise ValueError(f"map dims {h}x{w} not divisible by patch size {patch_size}")
    h_t, w_t = h // patch_size, w // patch_size
    pooled = values.reshape(h_t, patch_size, w_t, patch_size).mean(axis=(1, 3))
    return GradMap(values=pooled)


def token_variance(grid: TokenGrid) -> VarMap:
    """Local variance of the per-token scalar projection (mean over channels).

    Computed as avg_pool(x^2) - avg_pool(x)^2 with a 3x3 replicate-padded
    window over the token lattice; round-off negatives are clamped to 0.
    Special tokens do not participate.
    """
    h_t, w_t = grid.grid_shape
    scalar = grid.tokens.mean(axis=1).reshape(h_t, w_t)
    mean = ndimage.uniform_filter(scalar, size=3, mode="nearest")
    mean_sq = ndimage.uniform_filter(scalar * scalar, size=3, mode="nearest")
    return VarMap(values=np.maximum(mean_sq - mean * mean, 0.0))


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant input maps to all zeros."""
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def fuse_ga_map(
    grad: GradMap,
    var: VarMap,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> GaMap:
    """Weighted sum of the normalized cue maps, rescaled to [0, 1].

    The fusion is scale-free in (alpha, beta): only their ratio affects the
    result, so every downstream top-k selection is unchanged by rescaling.
    """
    if grad.values.shape != var.values.shape:
        raise ValueError(
            f"cue map shapes differ: {grad.values.shape} vs {var.values.shape}"
        )
    if alpha < 0 or beta < 0:
        raise ValueError("fusion weights must be nonnegative")
    if alpha == 0 and beta == 0:
        raise ValueError("at least one fusion weight must be positive")
    fused = alpha * minmax_normalize(grad.values) + beta * minmax_normalize(var.values)
    return GaMap(values=minmax_normalize(fused), alpha=alpha, beta=beta)


def compute_ga_map(
    frame: ImageFrame,
    grid: TokenGrid,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> GaMap:
    """Full per-frame pipeline: grayscale -> Sobel -> magnitude -> per-patch
    mean, fused with the token-variance map."""
    gray = to_grayscale(frame)
    gx, gy = sobel_gradients(gray)
    patch = frame.height // grid.grid_shape[0]
    grad = downsample_to_tokens(gradient_magnitude(gx, gy), patch)
    return fuse_ga_map(grad, token_variance(grid), alpha, beta)


def dump_maps(out_dir, frame_index: int, grad: GradMap, var: VarMap, ga: GaMap) -> list[str]:
    """Write the three per-frame maps as PGM images (values x 255, rounded)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, values in (("grad", grad.values), ("var", var.values), ("ga", ga.values)):
        raster = np.round(minmax_normalize(values) * 255.0).astype(np.uint8)
        path = os.path.join(out_dir, f"frame{frame_index:03d}_{name}.pgm")
        write_pgm(path, raster)
        paths.append(path)
    return paths
