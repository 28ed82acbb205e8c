"""Merge plans: build, cache, apply, invert.

A plan assigns every src token to its most cosine-similar dst token (across
all frames), keeps everything that is not src, and records per-dst group
sizes. Merging replaces each dst with the mean of its group; unmerging
replicates the merged value back to every group member, restoring the
original sequence length and order.

Plans are cached per forward pass: layers sharing ``layer // interval``
share one plan, so the similarity matrix is recomputed only at the first
layer of each group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .partition import PartitionLabels, TokenLabel

ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class MergePlan:
    """Src-to-dst assignment plus the surviving token order.

    ``kept`` is ascending (original order); ``group_size[k]`` counts the kept
    token at position k plus all srcs assigned to it; ``match_sim`` holds the
    cosine similarity of each assignment.
    """

    src_indices: np.ndarray
    dst_of_src: np.ndarray
    kept: np.ndarray
    group_size: np.ndarray
    match_sim: np.ndarray
    built_at_layer: int
    total: int

    @property
    def n_src(self) -> int:
        return self.src_indices.shape[0]

    @property
    def n_kept(self) -> int:
        return self.kept.shape[0]


@dataclass
class PlanCache:
    """Per-forward-pass plan store: one plan per ``layer // interval`` group."""

    interval: int
    plans: dict[int, MergePlan] = field(default_factory=dict)
    computations: int = 0
    hits: int = 0

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError(f"cache interval must be >= 1, got {self.interval}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; -1 if either norm is (near) zero so that
    degenerate tokens are never matched preferentially."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        return -1.0
    return float(np.dot(a, b) / (na * nb))


def _normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1)
    ok = norms >= ZERO_NORM_EPS
    out = np.zeros_like(x)
    out[ok] = x[ok] / norms[ok, None]
    return out, ok


def compute_merge_plan(
    features: np.ndarray,
    labels: PartitionLabels,
    layer: int = 0,
    min_sim: float = -1.0,
) -> MergePlan:
    """Assign each src token to its most similar dst token.

    Matching runs across all frames. Ties go to the lowest dst global index.
    A src whose best similarity falls below ``min_sim`` stays unmerged (kept);
    the default threshold of -1 merges every src.
    """
    total = labels.layout.total
    if features.shape[0] != total:
        raise ValueError(
            f"features have {features.shape[0]} rows, partition expects {total}"
        )
    src = np.flatnonzero(labels.flat == TokenLabel.SRC)
    dst = np.flatnonzero(labels.flat == TokenLabel.DST)
    if src.size == 0:
        return MergePlan(
            src_indices=np.empty(0, dtype=np.int64),
            dst_of_src=np.empty(0, dtype=np.int64),
            kept=np.arange(total, dtype=np.int64),
            group_size=np.ones(total, dtype=np.int64),
            match_sim=np.empty(0, dtype=np.float64),
            built_at_layer=layer,
            total=total,
        )
    if dst.size == 0:
        raise ValueError("src tokens exist but no dst anchors are available")

    src_n, src_ok = _normalize_rows(features[src])
    dst_n, dst_ok = _normalize_rows(features[dst])
    sims = src_n @ dst_n.T
    sims[~src_ok, :] = -1.0
    sims[:, ~dst_ok] = -1.0
    # argmax returns the first maximum: dst candidates are in ascending
    # global order, so ties resolve to the lowest dst index
    best = np.argmax(sims, axis=1)
    best_sim = sims[np.arange(src.size), best]
    matched = best_sim >= min_sim

    src_indices = src[matched]
    dst_of_src = dst[best[matched]]
    match_sim = best_sim[matched]

    kept_mask = np.ones(total, dtype=bool)
    kept_mask[src_indices] = False
    kept = np.flatnonzero(kept_mask)
    pos_in_kept = np.full(total, -1, dtype=np.int64)
    pos_in_kept[kept] = np.arange(kept.size)
    group_size = np.ones(kept.size, dtype=np.int64)
    np.add.at(group_size, pos_in_kept[dst_of_src], 1)
    return MergePlan(
        src_indices=src_indices,
        dst_of_src=dst_of_src,
        kept=kept,
        group_size=group_size,
        match_sim=match_sim,
        built_at_layer=layer,
        total=total,
    )


def _kept_positions(plan: MergePlan) -> np.ndarray:
    pos = np.full(plan.total, -1, dtype=np.int64)
    pos[plan.kept] = np.arange(plan.n_kept)
    return pos


def apply_merge(tokens: np.ndarray, plan: MergePlan) -> np.ndarray:
    """Collapse the sequence to kept order; each dst becomes the mean of
    itself and its assigned srcs, other kept tokens pass through unchanged."""
    if tokens.shape[0] != plan.total:
        raise ValueError(f"got {tokens.shape[0]} tokens, plan covers {plan.total}")
    merged = tokens[plan.kept].copy()
    if plan.n_src:
        pos = _kept_positions(plan)
        np.add.at(merged, pos[plan.dst_of_src], tokens[plan.src_indices])
        merged /= plan.group_size[:, None]
    return merged


def apply_unmerge(merged: np.ndarray, plan: MergePlan) -> np.ndarray:
    """Restore the original length: every token receives the merged value of
    its kept representative (itself if kept, its dst otherwise)."""
    if merged.shape[0] != plan.n_kept:
        raise ValueError(f"got {merged.shape[0]} merged rows, plan kept {plan.n_kept}")
    out = np.empty((plan.total,) + merged.shape[1:], dtype=merged.dtype)
    out[plan.kept] = merged
    if plan.n_src:
        pos = _kept_positions(plan)
        out[plan.src_indices] = merged[pos[plan.dst_of_src]]
    return out


def get_or_compute(
    cache: PlanCache,
    layer: int,
    features: np.ndarray,
    labels: PartitionLabels,
    min_sim: float = -1.0,
) -> MergePlan:
    """Return the plan for ``layer``, computing it once per interval group.

    Consulted once per layer in order, this computes fresh plans exactly at
    layers where ``layer % interval == 0`` and reuses the group plan
    everywhere else.
    """
    if layer < 0:
        raise ValueError(f"layer must be >= 0, got {layer}")
    group = layer // cache.interval
    plan = cache.plans.get(group)
    if plan is None:
        plan = compute_merge_plan(features, labels, layer=layer, min_sim=min_sim)
        cache.plans[group] = plan
        cache.computations += 1
    else:
        cache.hits += 1
    return plan


def plan_to_dict(plan: MergePlan) -> dict:
    """JSON-ready view: kept indices, assignment pairs, group sizes."""
    return {
        "built_at_layer": plan.built_at_layer,
        "total_tokens": plan.total,
        "kept": plan.kept.tolist(),
        "assignment": [
            [int(s), int(d)] for s, d in zip(plan.src_indices, plan.dst_of_src)
        ],
        "group_size": plan.group_size.tolist(),
    }


def dump_plan(plan: MergePlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2)
        fh.write("\n")
