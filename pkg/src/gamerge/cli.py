"""Command line front end: ``gamerge run | dump-maps | sweep``."""

from __future__ import annotations

import argparse
import os
import sys

from . import gamap
from .bench import MODES, RunConfig, load_config_file, run_benchmark
from .attention import ModelConfig
from .ingest import SceneSpec, build_tokenizer_params, load_image, to_grayscale, tokenize
from .partition import build_partition, dump_labels


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _print_results(results) -> None:
    for m in results:
        dev = "" if m.dev_max_abs is None else f"  dev_max={m.dev_max_abs:.3e}"
        print(
            f"{m.mode:>16} N={m.n_frames:<3d} R={m.cache_interval:<2d} "
            f"keep={m.keep_ratio:.3f} attn_flops={m.global_attn_flops} "
            f"plans={m.plan_computations} total_ms={m.total_ms:.1f}{dev}"
        )


def _cmd_run(args) -> int:
    config = load_config_file(args.config)
    results = run_benchmark(config)
    _print_results(results)
    if config.output:
        print(f"report written to {config.output}")
    return 0


def _cmd_dump_maps(args) -> int:
    names = sorted(
        n for n in os.listdir(args.image_dir)
        if os.path.splitext(n)[1].lower() in (".png", ".pgm", ".ppm", ".pnm")
    )
    if not names:
        print(f"no images found in {args.image_dir}", file=sys.stderr)
        return 1
    params = build_tokenizer_params(args.patch_size, args.embed_dim, seed=args.seed)
    maps = []
    for i, name in enumerate(names):
        frame = load_image(
            os.path.join(args.image_dir, name), args.patch_size, frame_index=i
        )
        if frame.channels != params.channels:
            params = build_tokenizer_params(
                args.patch_size, args.embed_dim, frame.channels, args.seed
            )
        grid = tokenize(frame, params)
        gray = to_grayscale(frame)
        gx, gy = gamap.sobel_gradients(gray)
        grad = gamap.downsample_to_tokens(
            gamap.gradient_magnitude(gx, gy), args.patch_size
        )
        var = gamap.token_variance(grid)
        ga = gamap.fuse_ga_map(grad, var, args.alpha, args.beta)
        gamap.dump_maps(args.out, i, grad, var, ga)
        maps.append(ga)
    labels = build_partition(maps, args.salient_fraction)
    dump_labels(args.out, labels)
    print(f"wrote map and label rasters for {len(names)} frames to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = RunConfig(
        scene=SceneSpec(
            n_frames=max(args.frames),
            height=args.height,
            width=args.width,
            overlap_shift_px=args.shift,
            texture=args.texture,
        ),
        scene_seed=args.scene_seed,
        model=ModelConfig(
            layers=args.layers,
            heads=args.heads,
            embed_dim=args.embed_dim,
            patch_size=args.patch_size,
            seed=args.seed,
        ),
        modes=tuple(args.modes.split(",")),
        frames_sweep=args.frames,
        cache_intervals=(args.cache_interval,),
        repetitions=args.reps,
        output=args.out,
        report_format=args.format,
    )
    results = run_benchmark(config)
    _print_results(results)
    if args.out:
        print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gamerge",
        description="Geometry-aware cached token merging benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the benchmark described by a config file")
    p_run.add_argument("config", help="flat key=value config file")
    p_run.set_defaults(func=_cmd_run)

    p_dump = sub.add_parser(
        "dump-maps", help="write grad/var/ga maps and partition rasters as PGM"
    )
    p_dump.add_argument("image_dir", help="directory of PNG/PGM/PPM frames")
    p_dump.add_argument("--out", default="maps", help="output directory")
    p_dump.add_argument("--patch-size", type=int, default=14)
    p_dump.add_argument("--embed-dim", type=int, default=64)
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--alpha", type=float, default=0.5)
    p_dump.add_argument("--beta", type=float, default=0.5)
    p_dump.add_argument("--salient-fraction", type=float, default=0.10)
    p_dump.set_defaults(func=_cmd_dump_maps)

    p_sweep = sub.add_parser("sweep", help="sweep frame counts across modes")
    p_sweep.add_argument("--frames", type=_int_list, default=(4, 8, 16, 32, 64))
    p_sweep.add_argument(
        "--modes", default=",".join(MODES), help="comma list: baseline,ga_merge,ga_merge_cached"
    )
    p_sweep.add_argument("--height", type=int, default=112)
    p_sweep.add_argument("--width", type=int, default=112)
    p_sweep.add_argument("--texture", default="mixed")
    p_sweep.add_argument("--shift", type=int, default=1)
    p_sweep.add_argument("--scene-seed", type=int, default=0)
    p_sweep.add_argument("--layers", type=int, default=8)
    p_sweep.add_argument("--heads", type=int, default=4)
    p_sweep.add_argument("--embed-dim", type=int, default=64)
    p_sweep.add_argument("--patch-size", type=int, default=14)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--cache-interval", type=int, default=6)
    p_sweep.add_argument("--reps", type=int, default=1)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--format", default="json", choices=("json", "csv"))
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
