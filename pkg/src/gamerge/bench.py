"""Benchmark harness: configure runs, count FLOPs, time stages, compare modes.

FLOPs are the primary efficiency metric (exact and portable); wall-clock is
reported as a secondary signal. Reports are emitted as a JSON array or as
RFC-4180 CSV with a frozen, versioned column order (see ``metrics.CSV_FIELDS``).
"""

from __future__ import annotations

import csv
import json
import os
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .attention import MERGE_GA, MERGE_OFF, ForwardOutput, ModelConfig, build_model, forward
from .ingest import SceneSpec, load_image, synth_scene
from .metrics import CSV_FIELDS, CSV_VERSION, RunMetrics, count_attention_flops

__all__ = [
    "MODES",
    "DeviationStats",
    "RunConfig",
    "compare_outputs",
    "count_attention_flops",
    "emit_report",
    "load_config_file",
    "run_benchmark",
]

MODES = ("baseline", "ga_merge", "ga_merge_cached")

_TIMING_FIELDS = (
    "tokenize_ms",
    "gamap_ms",
    "partition_ms",
    "plan_ms",
    "attention_ms",
    "total_ms",
)

_IMAGE_EXTS = (".png", ".pgm", ".ppm", ".pnm")


@dataclass
class RunConfig:
    """One benchmark invocation: scene source, model, modes, sweep, output."""

    scene: SceneSpec | str = field(
        default_factory=lambda: SceneSpec(8, 112, 112, overlap_shift_px=14, texture="mixed")
    )
    scene_seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    modes: tuple[str, ...] = ("baseline", "ga_merge_cached")
    frames_sweep: tuple[int, ...] = ()
    cache_intervals: tuple[int, ...] = (6,)
    repetitions: int = 1
    output: str | None = None
    report_format: str = "json"

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode is required")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}, expected one of {MODES}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.report_format not in ("json", "csv"):
            raise ValueError(f"unknown report format {self.report_format!r}")
        for r in self.cache_intervals:
            if r < 1:
                raise ValueError("cache intervals must be >= 1")


@dataclass(frozen=True)
class DeviationStats:
    max_abs: float
    mean_abs: float
    per_frame: tuple[tuple[float, float], ...]


def compare_outputs(a: ForwardOutput, b: ForwardOutput) -> DeviationStats:
    """Max-abs / mean-abs deviation of two dense outputs, with per-frame breakdown."""
    if a.dense.shape != b.dense.shape:
        raise ValueError(f"dense shapes differ: {a.dense.shape} vs {b.dense.shape}")
    diff = np.abs(a.dense - b.dense)
    per_frame = tuple(
        (float(diff[f].max()), float(diff[f].mean())) for f in range(diff.shape[0])
    )
    return DeviationStats(
        max_abs=float(diff.max()), mean_abs=float(diff.mean()), per_frame=per_frame
    )


def _list_images(directory) -> list[str]:
    return sorted(
        os.path.join(directory, name)
        for name in os.listdir(directory)
        if os.path.splitext(name)[1].lower() in _IMAGE_EXTS
    )


def _frames_for(config: RunConfig, n_frames: int):
    if isinstance(config.scene, SceneSpec):
        spec = replace(config.scene, n_frames=n_frames)
        return synth_scene(spec, seed=config.scene_seed)
    paths = _list_images(config.scene)
    if len(paths) < n_frames:
        raise ValueError(
            f"directory {config.scene!r} holds {len(paths)} images, need {n_frames}"
        )
    return [
        load_image(p, patch_size=config.model.patch_size, frame_index=i)
        for i, p in enumerate(paths[:n_frames])
    ]


def _mode_runs(config: RunConfig):
    """Expand the mode list into (name, merge_mode, interval) rows, baseline first."""
    runs = []
    if "baseline" in config.modes:
        runs.append(("baseline", MERGE_OFF, 1))
    if "ga_merge" in config.modes:
        runs.append(("ga_merge", MERGE_GA, 1))
    if "ga_merge_cached" in config.modes:
        for r in config.cache_intervals:
            runs.append(("ga_merge_cached", MERGE_GA, r))
    return runs


def _median_metrics(reps: list[RunMetrics]) -> RunMetrics:
    out = reps[0]
    for name in _TIMING_FIELDS:
        setattr(out, name, statistics.median(getattr(m, name) for m in reps))
    return out


def run_benchmark(config: RunConfig) -> list[RunMetrics]:
    """Run every (mode, frame count) point; aggregate timing medians over
    repetitions and record output deviation against the baseline mode."""
    if config.frames_sweep:
        sweep = config.frames_sweep
    elif isinstance(config.scene, SceneSpec):
        sweep = (config.scene.n_frames,)
    else:
        sweep = (len(_list_images(config.scene)),)
    results: list[RunMetrics] = []
    for n_frames in sweep:
        frames = _frames_for(config, n_frames)
        model = build_model(config.model)
        baseline_out: ForwardOutput | None = None
        for name, merge_mode, interval in _mode_runs(config):
            reps = []
            out = None
            for _ in range(config.repetitions):
                out = forward(model, frames, merge_mode=merge_mode, cache_interval=interval)
                reps.append(out.metrics)
            metrics = _median_metrics(reps)
            metrics.mode = name
            if name == "baseline":
                baseline_out = out
            if baseline_out is not None:
                dev = compare_outputs(out, baseline_out)
                metrics.dev_max_abs = dev.max_abs
                metrics.dev_mean_abs = dev.mean_abs
            results.append(metrics)
    if config.output:
        emit_report(results, config.report_format, config.output)
    return results


def emit_report(metrics: list[RunMetrics], report_format: str, path) -> None:
    """Write the report: JSON is one top-level array; CSV is RFC-4180 with the
    frozen column order and a leading version column."""
    if report_format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([m.to_dict() for m in metrics], fh, indent=2)
            fh.write("\n")
    elif report_format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_FIELDS)
            for m in metrics:
                row = m.to_dict()
                row["version"] = CSV_VERSION
                writer.writerow(
                    ["" if row[k] is None else row[k] for k in CSV_FIELDS]
                )
    else:
        raise ValueError(f"unknown report format {report_format!r}")


_SCENE_KEYS = {
    "scene": str,
    "texture": str,
    "height": int,
    "width": int,
    "n_frames": int,
    "overlap_shift_px": int,
    "scene_seed": int,
}
_MODEL_KEYS = {
    "layers": int,
    "heads": int,
    "embed_dim": int,
    "mlp_ratio": float,
    "patch_size": int,
    "model_seed": int,
    "alpha": float,
    "beta": float,
    "salient_fraction": float,
    "min_sim": float,
}
_RUN_KEYS = {
    "modes": str,
    "cache_intervals": str,
    "frames_sweep": str,
    "repetitions": int,
    "output": str,
    "report_format": str,
}


def load_config_file(path) -> RunConfig:
    """Parse a flat ``key = value`` config file (``#`` starts a comment)."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in raw:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value

    known = {**_SCENE_KEYS, **_MODEL_KEYS, **_RUN_KEYS}
    for key in raw:
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")

    def get(key, default, cast):
        return cast(raw[key]) if key in raw else default

    scene_value = raw.get("scene", "synthetic")
    if scene_value == "synthetic":
        scene = SceneSpec(
            n_frames=get("n_frames", 8, int),
            height=get("height", 112, int),
            width=get("width", 112, int),
            overlap_shift_px=get("overlap_shift_px", 14, int),
            texture=get("texture", "mixed", str),
        )
    else:
        scene = scene_value

    model = ModelConfig(
        layers=get("layers", 8, int),
        heads=get("heads", 4, int),
        embed_dim=get("embed_dim", 64, int),
        mlp_ratio=get("mlp_ratio", 4.0, float),
        patch_size=get("patch_size", 14, int),
        seed=get("model_seed", 0, int),
        alpha=get("alpha", 0.5, float),
        beta=get("beta", 0.5, float),
        salient_fraction=get("salient_fraction", 0.10, float),
        min_sim=get("min_sim", -1.0, float),
    )

    def int_list(key, default):
        if key not in raw:
            return default
        return tuple(int(v) for v in raw[key].split(",") if v.strip())

    modes = tuple(
        m.strip() for m in raw.get("modes", "baseline,ga_merge_cached").split(",") if m.strip()
    )
    return RunConfig(
        scene=scene,
        scene_seed=get("scene_seed", 0, int),
        model=model,
        modes=modes,
        frames_sweep=int_list("frames_sweep", ()),
        cache_intervals=int_list("cache_intervals", (6,)),
        repetitions=get("repetitions", 1, int),
        output=raw.get("output"),
        report_format=get("report_format", "json", str),
    )
