"""Global sequence bookkeeping for multi-frame token stacks.

The global order is frame-major: for each frame, its patch tokens in
row-major lattice order, then its special tokens. All index arithmetic for
partitioning, merging, and attention goes through this one layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import TokenGrid


@dataclass(frozen=True)
class SequenceLayout:
    n_frames: int
    patch_per_frame: int
    specials_per_frame: int
    grid_shape: tuple[int, int]

    @property
    def tokens_per_frame(self) -> int:
        return self.patch_per_frame + self.specials_per_frame

    @property
    def total(self) -> int:
        return self.n_frames * self.tokens_per_frame

    @property
    def total_specials(self) -> int:
        return self.n_frames * self.specials_per_frame

    def frame_slice(self, frame: int) -> slice:
        base = frame * self.tokens_per_frame
        return slice(base, base + self.tokens_per_frame)

    def patch_slice(self, frame: int) -> slice:
        base = frame * self.tokens_per_frame
        return slice(base, base + self.patch_per_frame)

    def special_slice(self, frame: int) -> slice:
        base = frame * self.tokens_per_frame + self.patch_per_frame
        return slice(base, base + self.specials_per_frame)

    def patch_global_indices(self, frame: int) -> np.ndarray:
        s = self.patch_slice(frame)
        return np.arange(s.start, s.stop)


def layout_for(grids: list[TokenGrid]) -> SequenceLayout:
    first = grids[0]
    for g in grids:
        if g.grid_shape != first.grid_shape:
            raise ValueError("all frames must share one token lattice shape")
    return SequenceLayout(
        n_frames=len(grids),
        patch_per_frame=first.n_tokens,
        specials_per_frame=first.specials.shape[0],
        grid_shape=first.grid_shape,
    )


def concat_sequence(grids: list[TokenGrid]) -> np.ndarray:
    """Stack all frames' tokens into one (total, d) array in global order."""
    parts = []
    for g in grids:
        parts.append(g.tokens)
        parts.append(g.specials)
    return np.concatenate(parts, axis=0)
