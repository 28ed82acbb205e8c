"""Sweep frame counts across modes and emit JSON + CSV reports.

The same sweep is available from the command line:

    gamerge sweep --frames 4,8,16 --modes baseline,ga_merge,ga_merge_cached
"""

from gamerge import ModelConfig, RunConfig, SceneSpec, emit_report, run_benchmark

config = RunConfig(
    scene=SceneSpec(n_frames=16, height=112, width=112, overlap_shift_px=1, texture="mixed"),
    model=ModelConfig(layers=8, heads=4, embed_dim=64, patch_size=14, seed=0),
    modes=("baseline", "ga_merge", "ga_merge_cached"),
    frames_sweep=(4, 8, 16),
    cache_intervals=(4,),
    repetitions=1,
)

results = run_benchmark(config)

header = f"{'mode':>16} {'N':>3} {'R':>2} {'keep':>6} {'attn GFLOP':>11} {'plans':>5} {'ms':>7} {'max dev':>9}"
print(header)
print("-" * len(header))
for m in results:
    dev = "-" if m.dev_max_abs is None else f"{m.dev_max_abs:.2e}"
    print(
        f"{m.mode:>16} {m.n_frames:>3} {m.cache_interval:>2} {m.keep_ratio:>6.3f} "
        f"{m.global_attn_flops/1e9:>11.3f} {m.plan_computations:>5} "
        f"{m.total_ms:>7.0f} {dev:>9}"
    )

emit_report(results, "json", "demo_out/sweep.json")
emit_report(results, "csv", "demo_out/sweep.csv")
print("\nwrote demo_out/sweep.json and demo_out/sweep.csv")
