"""Image loading, synthetic scenes, grayscale conversion, and tokenization.

Frames are tokenized with a seeded linear patch projection: each
``patch_size x patch_size`` pixel block, scaled to [0, 1], is flattened and
right-multiplied by a fixed random matrix. Every frame additionally carries
five special tokens (one camera + four register); the first frame gets its
own set, all later frames share a second set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .netpbm import read_pnm

SPECIALS_PER_FRAME = 5

# channels of the seed stream used for each deterministic initialization
_SEED_PROJECTION = 0
_SEED_SPECIALS_FIRST = 1
_SEED_SPECIALS_SHARED = 2

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

TEXTURES = ("checker", "ramp", "flat", "mixed")


@dataclass(frozen=True)
class ImageFrame:
    """One 8-bit frame of a sequence. ``pixels`` is (H, W, C) with C in {1, 3}."""

    pixels: np.ndarray
    frame_index: int

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class GrayImage:
    """Grayscale intensities in [0, 1], same H x W as the source frame."""

    intensity: np.ndarray


@dataclass(frozen=True)
class TokenizerParams:
    """Seeded tokenizer state; fully determined by (patch_size, embed_dim, channels, seed)."""

    patch_size: int
    embed_dim: int
    channels: int
    seed: int
    projection: np.ndarray       # (patch_size^2 * C, d)
    specials_first: np.ndarray   # (5, d), frame 0 only
    specials_shared: np.ndarray  # (5, d), frames >= 1


@dataclass(frozen=True)
class TokenGrid:
    """Per-frame patch tokens on an h_t x w_t lattice plus special tokens.

    ``tokens`` is (h_t * w_t, d) in row-major lattice order; ``specials`` is (5, d).
    """

    tokens: np.ndarray
    specials: np.ndarray
    frame_index: int
    grid_shape: tuple[int, int]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class SceneSpec:
    """Synthetic multi-frame scene description."""

    n_frames: int
    height: int
    width: int
    overlap_shift_px: int = 0
    texture: str = "mixed"


def _rng(seed: int, channel: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(channel,)))


def build_tokenizer_params(
    patch_size: int = 14,
    embed_dim: int = 64,
    channels: int = 1,
    seed: int = 0,
) -> TokenizerParams:
    """Create the seeded projection and special-token sets."""
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    if embed_dim < 8:
        raise ValueError(f"embed_dim must be >= 8, got {embed_dim}")
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    in_dim = patch_size * patch_size * channels
    projection = _rng(seed, _SEED_PROJECTION).normal(0.0, 1.0, (in_dim, embed_dim))
    projection /= np.sqrt(in_dim)
    specials_first = _rng(seed, _SEED_SPECIALS_FIRST).normal(0.0, 0.02, (SPECIALS_PER_FRAME, embed_dim))
    specials_shared = _rng(seed, _SEED_SPECIALS_SHARED).normal(0.0, 0.02, (SPECIALS_PER_FRAME, embed_dim))
    return TokenizerParams(
        patch_size=patch_size,
        embed_dim=embed_dim,
        channels=channels,
        seed=seed,
        projection=projection,
        specials_first=specials_first,
        specials_shared=specials_shared,
    )


def _check_divisible(height: int, width: int, patch_size: int) -> None:
    if height % patch_size or width % patch_size:
        raise ValueError(
            f"image dims {height}x{width} not divisible by patch size {patch_size}"
        )


def load_image(path, patch_size: int = 14, frame_index: int = 0) -> ImageFrame:
    """Load a PNG or binary PGM/PPM file as an ImageFrame.

    Raises if the file is missing, the format is unsupported, or the
    dimensions are not divisible by ``patch_size``.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        arr = read_pnm(path)
    elif ext == ".png":
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            arr = np.asarray(im, dtype=np.uint8)
    else:
        raise ValueError(f"unsupported image format {ext!r} (PNG, PGM, PPM)")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] not in (1, 3):
        raise ValueError(f"unsupported channel count {arr.shape[2]}")
    _check_divisible(arr.shape[0], arr.shape[1], patch_size)
    return ImageFrame(pixels=arr, frame_index=frame_index)


def to_grayscale(frame: ImageFrame) -> GrayImage:
    """Convert a frame to [0, 1] grayscale (luma weights 0.299/0.587/0.114 for RGB)."""
    px = frame.pixels.astype(np.float64)
    if frame.channels == 3:
        r, g, b = LUMA_WEIGHTS
        gray = (r * px[:, :, 0] + g * px[:, :, 1] + b * px[:, :, 2]) / 255.0
    else:
        gray = px[:, :, 0] / 255.0
    return GrayImage(intensity=gray)


def tokenize(frame: ImageFrame, params: TokenizerParams) -> TokenGrid:
    """Project each pixel patch to a d-dim token; attach the frame's special tokens.

    Pure function of (pixels, params): repeated calls are bit-identical.
    """
    h, w, c = frame.pixels.shape
    p = params.patch_size
    _check_divisible(h, w, p)
    if c != params.channels:
        raise ValueError(f"frame has {c} channels, tokenizer built for {params.channels}")
    h_t, w_t = h // p, w // p
    patches = frame.pixels.reshape(h_t, p, w_t, p, c)
    patches = patches.transpose(0, 2, 1, 3, 4).reshape(h_t * w_t, p * p * c)
    tokens = (patches.astype(np.float64) / 255.0) @ params.projection
    specials = params.specials_first if frame.frame_index == 0 else params.specials_shared
    return TokenGrid(
        tokens=tokens,
        specials=specials.copy(),
        frame_index=frame.frame_index,
        grid_shape=(h_t, w_t),
    )


def _base_texture(spec: SceneSpec, seed: int) -> np.ndarray:
    """Frame-0 pixel pattern for a synthetic scene, (H, W) uint8."""
    h, w = spec.height, spec.width
    rng = _rng(seed, 3)
    cols = np.arange(w)
    rows = np.arange(h)
    if spec.texture == "flat":
        return np.full((h, w), 128, dtype=np.uint8)
    if spec.texture == "ramp":
        offset = int(rng.integers(0, w))
        ramp = ((cols + offset) % w) * 255.0 / max(w - 1, 1)
        return np.tile(np.round(ramp).astype(np.uint8), (h, 1))
    cell = 7
    phase_r = int(rng.integers(0, cell))
    phase_c = int(rng.integers(0, cell))
    rr = (rows + phase_r) // cell
    cc = (cols + phase_c) // cell
    checker = ((rr[:, None] + cc[None, :]) % 2 * 255).astype(np.uint8)
    if spec.texture == "checker":
        return checker
    if spec.texture == "mixed":
        # textured left half, flat right half
        out = np.full((h, w), 128, dtype=np.uint8)
        out[:, : w // 2] = checker[:, : w // 2]
        return out
    raise ValueError(f"unknown texture {spec.texture!r} (expected one of {TEXTURES})")


def synth_scene(spec: SceneSpec, seed: int = 0) -> list[ImageFrame]:
    """Synthesize overlapping frames: frame k is frame 0 shifted left by
    k * overlap_shift_px columns with wraparound, so content is shared
    across frames.
    """
    if spec.n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if spec.height < 1 or spec.width < 1:
        raise ValueError("frame dims must be positive")
    if spec.overlap_shift_px < 0:
        raise ValueError("overlap_shift_px must be >= 0")
    if spec.overlap_shift_px * (spec.n_frames - 1) >= spec.width and spec.n_frames > 1:
        raise ValueError(
            f"infeasible scene: shift {spec.overlap_shift_px} x {spec.n_frames - 1} "
            f"frames exceeds width {spec.width}"
        )
    base = _base_texture(spec, seed)
    frames = []
    for k in range(spec.n_frames):
        shifted = np.roll(base, -k * spec.overlap_shift_px, axis=1)
        frames.append(ImageFrame(pixels=shifted[:, :, None].copy(), frame_index=k))
    return frames
