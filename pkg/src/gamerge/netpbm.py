"""Minimal binary netpbm (P5/P6) reader and PGM writer.

Used for loading test imagery without a heavyweight decoder and for the
debug map dumps, which are plain 8-bit PGM rasters.
"""

from __future__ import annotations

import numpy as np


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines between header tokens
    n = len(data)
    while pos < n:
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated netpbm header")
    return data[start:pos], pos


def read_pnm(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file.

    Returns an (H, W) array for P5 or an (H, W, 3) array for P6, dtype uint8.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported netpbm magic {magic!r} (only binary P5/P6)")
    width, pos = _read_token(data, pos)
    height, pos = _read_token(data, pos)
    maxval, pos = _read_token(data, pos)
    w, h, mv = int(width), int(height), int(maxval)
    if mv <= 0 or mv > 255:
        raise ValueError(f"unsupported maxval {mv} (only 8-bit netpbm)")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    count = w * h * channels
    raster = data[pos : pos + count]
    if len(raster) != count:
        raise ValueError("truncated netpbm raster")
    arr = np.frombuffer(raster, dtype=np.uint8)
    return arr.reshape((h, w) if channels == 1 else (h, w, 3))


def write_pgm(path, values: np.ndarray) -> None:
    """Write an (H, W) uint8 array as binary PGM (P5)."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"PGM expects a 2-D array, got shape {values.shape}")
    if values.dtype != np.uint8:
        if values.min() < 0 or values.max() > 255:
            raise ValueError("PGM values must lie in [0, 255]")
        values = values.astype(np.uint8)
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(values.tobytes())
