"""Run metrics and the attention FLOP model shared by the model and the bench."""

from __future__ import annotations

from dataclasses import dataclass, fields


def count_attention_flops(seq_len: int, embed_dim: int, heads: int, layers: int) -> int:
    """Exact FLOP count for ``layers`` attention layers over ``seq_len`` tokens.

    Per layer: 2 * m^2 * d for the score and weighted-sum matmuls (summed over
    heads, the head count cancels) plus 4 * m * d^2 for the q/k/v/out
    projections. Deterministic and platform-independent.
    """
    if seq_len < 1 or embed_dim < 1 or heads < 1 or layers < 0:
        raise ValueError("all arguments must be positive (layers >= 0)")
    if embed_dim % heads:
        raise ValueError(f"embed_dim {embed_dim} not divisible by heads {heads}")
    per_layer = 2 * seq_len * seq_len * embed_dim + 4 * seq_len * embed_dim * embed_dim
    return per_layer * layers


@dataclass
class RunMetrics:
    """Everything one (mode, frame count) run reports.

    Token counts and FLOPs are exact and reproducible for a fixed seed;
    wall-clock fields vary run to run.
    """

    mode: str
    n_frames: int
    cache_interval: int
    tokens_total: int
    tokens_salient: int
    tokens_dst: int
    tokens_src: int
    tokens_special: int
    kept_tokens: int
    keep_ratio: float
    global_attn_flops: int
    global_attn_quad_flops: int
    plan_computations: int
    plan_cache_hits: int
    match_sim_mean: float | None
    tokenize_ms: float
    gamap_ms: float
    partition_ms: float
    plan_ms: float
    attention_ms: float
    total_ms: float
    dev_max_abs: float | None = None
    dev_mean_abs: float | None = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# frozen v1 column order for CSV reports; documented in the README
CSV_FIELDS = ("version",) + tuple(f.name for f in fields(RunMetrics))
CSV_VERSION = 1
