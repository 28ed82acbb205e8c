"""Token partitioning: salient / dst / src / special.

Per frame, the highest-importance tokens are marked salient and never merge.
Merge anchors (dst) are all remaining first-frame tokens, plus one
lowest-importance non-salient token per 2x2 lattice cell in later frames.
Everything else is src and will be merged into some dst. Special tokens stay
out of merging entirely.

Only the ordering of importance scores matters: any strictly monotone
rescaling of the map leaves the partition unchanged.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .gamap import GaMap
from .layout import SequenceLayout
from .netpbm import write_pgm

DEFAULT_SALIENT_FRACTION = 0.10


class TokenLabel(IntEnum):
    SALIENT = 0
    DST = 1
    SRC = 2
    SPECIAL = 3


# raster gray levels for the debug dump
_LABEL_GRAY = {TokenLabel.SALIENT: 255, TokenLabel.DST: 170, TokenLabel.SRC: 85}


@dataclass(frozen=True)
class PartitionLabels:
    """Exhaustive, mutually exclusive labels over the global token sequence.

    ``flat`` holds one TokenLabel value per global index (patch tokens and
    specials); ``frame_labels[f]`` is the per-frame view over patch tokens
    only. ``per_frame_counts[f]`` is (n_salient, n_dst, n_src).
    """

    layout: SequenceLayout
    flat: np.ndarray
    frame_labels: list[np.ndarray]
    per_frame_counts: list[tuple[int, int, int]]

    @property
    def n_frames(self) -> int:
        return self.layout.n_frames

    @property
    def n_src_total(self) -> int:
        return sum(c[2] for c in self.per_frame_counts)

    @property
    def kept_total(self) -> int:
        return self.layout.total - self.n_src_total

    @property
    def keep_ratio(self) -> float:
        return self.kept_total / self.layout.total

    def count_total(self, label: TokenLabel) -> int:
        return int(np.count_nonzero(self.flat == label))


def _ceil_fraction(fraction: float, n: int) -> int:
    # guard against float fuzz pushing an exact product past the next integer
    return int(math.ceil(round(fraction * n, 9)))


def select_salient(ga: GaMap, fraction: float = DEFAULT_SALIENT_FRACTION) -> np.ndarray:
    """Indices of the ceil(fraction * n) highest-scoring tokens of one frame.

    Ties go to the lower linear index. Returned sorted ascending.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    scores = ga.values.ravel()
    k = _ceil_fraction(fraction, scores.size)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def select_dst(ga: GaMap, salient: np.ndarray, frame_index: int) -> np.ndarray:
    """Merge-anchor indices for one frame.

    Frame 0: every non-salient patch token. Later frames: per disjoint 2x2
    cell, the non-salient token with the lowest score (ties to the lower
    linear index); a fully salient cell contributes none. Odd lattice edges
    form 2x1 / 1x2 / 1x1 cells under the same rule.
    """
    h_t, w_t = ga.values.shape
    n = h_t * w_t
    salient_mask = np.zeros(n, dtype=bool)
    salient_mask[salient] = True
    if frame_index == 0:
        return np.flatnonzero(~salient_mask)
    scores = ga.values.ravel()
    picks = []
    for r0 in range(0, h_t, 2):
        for c0 in range(0, w_t, 2):
            rows = range(r0, min(r0 + 2, h_t))
            cols = range(c0, min(c0 + 2, w_t))
            cell = [r * w_t + c for r in rows for c in cols]
            candidates = [i for i in cell if not salient_mask[i]]
            if candidates:
                picks.append(min(candidates, key=lambda i: (scores[i], i)))
    return np.asarray(sorted(picks), dtype=np.int64)


def build_partition(
    ga_maps: list[GaMap],
    fraction: float = DEFAULT_SALIENT_FRACTION,
    specials_per_frame: int = 5,
) -> PartitionLabels:
    """Label every token of every frame: salient first, then dst, rest src."""
    if not ga_maps:
        raise ValueError("need at least one frame")
    grid_shape = ga_maps[0].grid_shape
    n = grid_shape[0] * grid_shape[1]
    layout = SequenceLayout(
        n_frames=len(ga_maps),
        patch_per_frame=n,
        specials_per_frame=specials_per_frame,
        grid_shape=grid_shape,
    )
    flat = np.full(layout.total, TokenLabel.SPECIAL, dtype=np.int8)
    frame_labels = []
    counts = []
    for f, ga in enumerate(ga_maps):
        if ga.grid_shape != grid_shape:
            raise ValueError("all frames must share one token lattice shape")
        labels = np.full(n, TokenLabel.SRC, dtype=np.int8)
        salient = select_salient(ga, fraction)
        dst = select_dst(ga, salient, f)
        labels[salient] = TokenLabel.SALIENT
        labels[dst] = TokenLabel.DST
        flat[layout.patch_slice(f)] = labels
        frame_labels.append(labels)
        counts.append(
            (
                len(salient),
                len(dst),
                int(np.count_nonzero(labels == TokenLabel.SRC)),
            )
        )
    return PartitionLabels(
        layout=layout, flat=flat, frame_labels=frame_labels, per_frame_counts=counts
    )


def dump_labels(out_dir, labels: PartitionLabels) -> list[str]:
    """Write one PGM per frame: salient=255, dst=170, src=85."""
    os.makedirs(out_dir, exist_ok=True)
    h_t, w_t = labels.layout.grid_shape
    paths = []
    for f, frame in enumerate(labels.frame_labels):
        raster = np.zeros(frame.shape, dtype=np.uint8)
        for label, gray in _LABEL_GRAY.items():
            raster[frame == label] = gray
        path = os.path.join(out_dir, f"frame{f:03d}_labels.pgm")
        write_pgm(path, raster.reshape(h_t, w_t))
        paths.append(path)
    return paths
