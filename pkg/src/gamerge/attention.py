"""Alternating frame/global attention stack hosting the merge hooks.

Layers alternate: even indices run attention within each frame, odd indices
run attention over the concatenation of all frames. In ``ga_merge`` mode the
global layers shrink their sequence with a cached merge plan and restore it
afterwards, so every downstream shape is unchanged. Each attention layer is
followed by a pre-norm MLP block.

Everything is seeded and pure: the same config and input give bit-identical
outputs, and a built model is immutable and safe to share across concurrent
forward passes (each pass owns its own plan cache).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import gamap
from .ingest import (
    SPECIALS_PER_FRAME,
    ImageFrame,
    build_tokenizer_params,
    tokenize,
)
from .layout import SequenceLayout, concat_sequence, layout_for
from .merge import MergePlan, PlanCache, apply_merge, apply_unmerge, get_or_compute
from .metrics import RunMetrics, count_attention_flops
from .partition import PartitionLabels, TokenLabel, build_partition

MERGE_OFF = "off"
MERGE_GA = "ga_merge"

_LN_EPS = 1e-6
_WEIGHT_STD = 0.02

# seed-stream channels for weight init (tokenizer uses channels 0-2)
_SEED_LAYERS = 100
_SEED_DENSE_HEAD = 99


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 8
    heads: int = 4
    embed_dim: int = 64
    mlp_ratio: float = 4.0
    patch_size: int = 14
    seed: int = 0
    merge_mode: str = MERGE_OFF
    cache_interval: int = 1
    alpha: float = 0.5
    beta: float = 0.5
    salient_fraction: float = 0.10
    min_sim: float = -1.0
    specials_per_frame: int = SPECIALS_PER_FRAME

    def __post_init__(self):
        if self.layers < 2 or self.layers % 2:
            raise ValueError(f"layers must be even and >= 2, got {self.layers}")
        if self.embed_dim % self.heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.embed_dim < 8:
            raise ValueError(f"embed_dim must be >= 8, got {self.embed_dim}")
        if self.mlp_ratio <= 0:
            raise ValueError("mlp_ratio must be positive")
        if self.merge_mode not in (MERGE_OFF, MERGE_GA):
            raise ValueError(f"unknown merge mode {self.merge_mode!r}")
        if self.cache_interval < 1:
            raise ValueError("cache_interval must be >= 1")
        if not 0.0 <= self.salient_fraction < 1.0:
            raise ValueError("salient_fraction must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


@dataclass(frozen=True)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    attn_scale: np.ndarray
    attn_shift: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    mlp_scale: np.ndarray
    mlp_shift: np.ndarray


@dataclass(frozen=True)
class Model:
    config: ModelConfig
    layers: tuple[LayerWeights, ...]
    head_weight: np.ndarray
    head_bias: np.ndarray


@dataclass
class MergeContext:
    """State threaded through the global layers of one ga_merge forward pass."""

    labels: PartitionLabels
    cache: PlanCache
    min_sim: float = -1.0


@dataclass(frozen=True)
class ForwardOutput:
    dense: np.ndarray         # (N, h_t, w_t, d)
    specials_out: np.ndarray  # (N, s, d)
    metrics: RunMetrics


def _rng(seed: int, channel: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(channel,)))


def build_model(config: ModelConfig) -> Model:
    """Deterministic weights: identical seeds give bit-identical models."""
    d = config.embed_dim
    hidden = int(round(config.mlp_ratio * d))
    layers = []
    for i in range(config.layers):
        rng = _rng(config.seed, _SEED_LAYERS + i)
        layers.append(
            LayerWeights(
                wq=rng.normal(0.0, _WEIGHT_STD, (d, d)),
                wk=rng.normal(0.0, _WEIGHT_STD, (d, d)),
                wv=rng.normal(0.0, _WEIGHT_STD, (d, d)),
                wo=rng.normal(0.0, _WEIGHT_STD, (d, d)),
                attn_scale=np.ones(d),
                attn_shift=np.zeros(d),
                w1=rng.normal(0.0, _WEIGHT_STD, (d, hidden)),
                b1=np.zeros(hidden),
                w2=rng.normal(0.0, _WEIGHT_STD, (hidden, d)),
                b2=np.zeros(d),
                mlp_scale=np.ones(d),
                mlp_shift=np.zeros(d),
            )
        )
    head_rng = _rng(config.seed, _SEED_DENSE_HEAD)
    return Model(
        config=config,
        layers=tuple(layers),
        head_weight=head_rng.normal(0.0, _WEIGHT_STD, (d, d)),
        head_bias=np.zeros(d),
    )


def layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS) * scale + shift


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def attention_update(
    seq: np.ndarray, w: LayerWeights, heads: int, return_weights: bool = False
):
    """Pre-norm multi-head attention delta (no residual added)."""
    m, d = seq.shape
    hd = d // heads
    normed = layer_norm(seq, w.attn_scale, w.attn_shift)
    q = (normed @ w.wq).reshape(m, heads, hd).transpose(1, 0, 2)
    k = (normed @ w.wk).reshape(m, heads, hd).transpose(1, 0, 2)
    v = (normed @ w.wv).reshape(m, heads, hd).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(hd)
    attn = _softmax(scores)
    ctx = (attn @ v).transpose(1, 0, 2).reshape(m, d)
    delta = ctx @ w.wo
    if return_weights:
        return delta, attn
    return delta


def multi_head_attention(
    seq: np.ndarray, w: LayerWeights, heads: int, return_weights: bool = False
):
    """Scaled dot-product attention with pre-norm and residual: x + attn(ln(x))."""
    if return_weights:
        delta, attn = attention_update(seq, w, heads, return_weights=True)
        return seq + delta, attn
    return seq + attention_update(seq, w, heads)


def mlp_update(seq: np.ndarray, w: LayerWeights) -> np.ndarray:
    normed = layer_norm(seq, w.mlp_scale, w.mlp_shift)
    return _gelu(normed @ w.w1 + w.b1) @ w.w2 + w.b2


def frame_attention_layer(
    x: np.ndarray, layout: SequenceLayout, w: LayerWeights, heads: int
) -> np.ndarray:
    """Attention within each frame (patch + special tokens); no cross-frame edges."""
    out = np.empty_like(x)
    for f in range(layout.n_frames):
        sl = layout.frame_slice(f)
        out[sl] = multi_head_attention(x[sl], w, heads)
    return out


def global_attention_layer(
    x: np.ndarray,
    layout: SequenceLayout,
    w: LayerWeights,
    heads: int,
    merge_ctx: MergeContext | None = None,
    layer: int = 0,
    plan: MergePlan | None = None,
) -> tuple[np.ndarray, int]:
    """Attention over the full multi-frame sequence.

    With a merge context, the sequence is collapsed by the cached plan,
    attended, expanded back to full length, and the attention delta is added
    to the original residual stream. Returns the output and the sequence
    length that was actually attended. A pre-resolved ``plan`` skips the
    cache consultation.
    """
    if merge_ctx is None:
        return multi_head_attention(x, w, heads), layout.total
    if plan is None:
        plan = get_or_compute(
            merge_ctx.cache, layer, x, merge_ctx.labels, merge_ctx.min_sim
        )
    merged = apply_merge(x, plan)
    delta = attention_update(merged, w, heads)
    return x + apply_unmerge(delta, plan), plan.n_kept


def _empty_counts(layout: SequenceLayout) -> dict:
    return {
        "salient": 0,
        "dst": 0,
        "src": 0,
        "special": layout.total_specials,
    }


def _label_counts(labels: PartitionLabels) -> dict:
    return {
        "salient": labels.count_total(TokenLabel.SALIENT),
        "dst": labels.count_total(TokenLabel.DST),
        "src": labels.count_total(TokenLabel.SRC),
        "special": labels.count_total(TokenLabel.SPECIAL),
    }


def forward(
    model: Model,
    frames: list[ImageFrame],
    merge_mode: str | None = None,
    cache_interval: int | None = None,
) -> ForwardOutput:
    """Tokenize, partition (when merging), run the layer stack, and apply the
    dense head; metrics cover token counts, FLOPs, and per-stage wall-clock.
    """
    if not frames:
        raise ValueError("need at least one frame")
    cfg = model.config
    mode = cfg.merge_mode if merge_mode is None else merge_mode
    interval = cfg.cache_interval if cache_interval is None else cache_interval
    if mode not in (MERGE_OFF, MERGE_GA):
        raise ValueError(f"unknown merge mode {mode!r}")

    t_start = time.perf_counter()
    params = build_tokenizer_params(
        cfg.patch_size, cfg.embed_dim, frames[0].channels, cfg.seed
    )
    grids = [tokenize(f, params) for f in frames]
    layout = layout_for(grids)
    x = concat_sequence(grids)
    tokenize_ms = (time.perf_counter() - t_start) * 1e3

    gamap_ms = partition_ms = plan_ms = 0.0
    merge_ctx = None
    labels = None
    if mode == MERGE_GA:
        t0 = time.perf_counter()
        maps = [
            gamap.compute_ga_map(f, g, cfg.alpha, cfg.beta)
            for f, g in zip(frames, grids)
        ]
        gamap_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        labels = build_partition(maps, cfg.salient_fraction, cfg.specials_per_frame)
        partition_ms = (time.perf_counter() - t0) * 1e3
        merge_ctx = MergeContext(
            labels=labels, cache=PlanCache(interval=interval), min_sim=cfg.min_sim
        )

    quad_flops = 0
    total_flops = 0
    attention_ms = 0.0
    d = cfg.embed_dim
    for layer_idx in range(cfg.layers):
        w = model.layers[layer_idx]
        plan = None
        if merge_ctx is not None:
            # plan schedule runs on the layer clock: ``interval`` consecutive
            # layers share one plan, built from the features entering the
            # group's first layer
            t0 = time.perf_counter()
            plan = get_or_compute(merge_ctx.cache, layer_idx, x, labels, cfg.min_sim)
            plan_ms += (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        if layer_idx % 2 == 0:
            x = frame_attention_layer(x, layout, w, cfg.heads)
        else:
            x, attended = global_attention_layer(
                x, layout, w, cfg.heads, merge_ctx, layer_idx, plan=plan
            )
            quad_flops += 2 * attended * attended * d
            total_flops += count_attention_flops(attended, d, cfg.heads, 1)
        x = x + mlp_update(x, w)
        attention_ms += (time.perf_counter() - t0) * 1e3

    dense_tokens = x @ model.head_weight + model.head_bias
    h_t, w_t = layout.grid_shape
    dense = np.stack(
        [
            dense_tokens[layout.patch_slice(f)].reshape(h_t, w_t, d)
            for f in range(layout.n_frames)
        ]
    )
    specials_out = np.stack(
        [dense_tokens[layout.special_slice(f)] for f in range(layout.n_frames)]
    )

    counts = _label_counts(labels) if labels is not None else _empty_counts(layout)
    kept = layout.total - counts["src"]
    if merge_ctx is not None:
        sims = [p.match_sim for p in merge_ctx.cache.plans.values() if p.n_src]
        match_sim_mean = float(np.mean(np.concatenate(sims))) if sims else None
        plan_computations = merge_ctx.cache.computations
        plan_cache_hits = merge_ctx.cache.hits
    else:
        match_sim_mean = None
        plan_computations = 0
        plan_cache_hits = 0

    metrics = RunMetrics(
        mode=mode,
        n_frames=layout.n_frames,
        cache_interval=interval if mode == MERGE_GA else 0,
        tokens_total=layout.total,
        tokens_salient=counts["salient"],
        tokens_dst=counts["dst"],
        tokens_src=counts["src"],
        tokens_special=counts["special"],
        kept_tokens=kept,
        keep_ratio=kept / layout.total,
        global_attn_flops=total_flops,
        global_attn_quad_flops=quad_flops,
        plan_computations=plan_computations,
        plan_cache_hits=plan_cache_hits,
        match_sim_mean=match_sim_mean,
        tokenize_ms=tokenize_ms,
        gamap_ms=gamap_ms,
        partition_ms=partition_ms,
        plan_ms=plan_ms,
        attention_ms=attention_ms,
        total_ms=(time.perf_counter() - t_start) * 1e3,
    )
    return ForwardOutput(dense=dense, specials_out=specials_out, metrics=metrics)
