import csv
import json

import numpy as np
import pytest

from gamerge.attention import ModelConfig
from gamerge.bench import (
    RunConfig,
    compare_outputs,
    count_attention_flops,
    emit_report,
    load_config_file,
    run_benchmark,
)
from gamerge.cli import main as cli_main
from gamerge.ingest import SceneSpec
from gamerge.metrics import CSV_FIELDS

from conftest import write_pgm_bytes


def tiny_config(**kw):
    defaults = dict(
        scene=SceneSpec(3, 28, 28, overlap_shift_px=0, texture="checker"),
        model=ModelConfig(layers=2, heads=4, embed_dim=32, patch_size=14, seed=1),
        modes=("baseline", "ga_merge"),
        repetitions=1,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestFlopCounter:
    def test_single_token(self):
        d = 64
        assert count_attention_flops(1, d, 4, 1) == 2 * d + 4 * d * d

    def test_doubling_sequence_quadruples_quadratic_term(self):
        d, heads = 64, 4
        for m in (3, 10, 57):
            quad = count_attention_flops(m, d, heads, 1) - 4 * m * d * d
            quad2 = count_attention_flops(2 * m, d, heads, 1) - 8 * m * d * d
            assert quad2 == 4 * quad

    def test_keep_ratio_squared_relation(self):
        # integer cross-multiplication: quad(kept) * total^2 == quad(total) * kept^2
        d, heads = 64, 4
        total, kept = 552, 265
        quad_full = 2 * total * total * d
        quad_kept = 2 * kept * kept * d
        assert quad_kept * total * total == quad_full * kept * kept

    def test_layers_scale_linearly(self):
        assert count_attention_flops(7, 32, 4, 6) == 6 * count_attention_flops(7, 32, 4, 1)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            count_attention_flops(0, 32, 4, 1)
        with pytest.raises(ValueError):
            count_attention_flops(5, 30, 4, 1)


class TestCompareOutputs:
    def test_self_comparison_zero(self):
        results = run_benchmark(tiny_config(modes=("baseline",)))
        assert len(results) == 1
        assert results[0].dev_max_abs == 0.0
        assert results[0].dev_mean_abs == 0.0

    def test_shape_mismatch(self):
        from gamerge.attention import build_model, forward
        from gamerge.ingest import synth_scene

        model = build_model(ModelConfig(layers=2, heads=4, embed_dim=32))
        a = forward(model, synth_scene(SceneSpec(2, 28, 28)))
        b = forward(model, synth_scene(SceneSpec(3, 28, 28)))
        with pytest.raises(ValueError, match="shapes"):
            compare_outputs(a, b)

    def test_per_frame_breakdown(self):
        from gamerge.attention import build_model, forward
        from gamerge.ingest import synth_scene

        model = build_model(ModelConfig(layers=2, heads=4, embed_dim=32))
        frames = synth_scene(SceneSpec(2, 28, 28))
        a = forward(model, frames)
        dev = compare_outputs(a, a)
        assert dev.per_frame == ((0.0, 0.0), (0.0, 0.0))


class TestRunBenchmark:
    def test_baseline_single_frame(self):
        cfg = tiny_config(
            scene=SceneSpec(1, 28, 28, texture="checker"), modes=("baseline",)
        )
        (m,) = run_benchmark(cfg)
        assert m.keep_ratio == 1.0
        assert m.dev_max_abs == 0.0
        assert m.tokens_src == 0

    def test_duplicate_frames_merge_hard(self):
        results = run_benchmark(tiny_config())
        by_mode = {m.mode: m for m in results}
        assert by_mode["ga_merge"].keep_ratio < 1.0
        assert by_mode["ga_merge"].match_sim_mean == pytest.approx(1.0, abs=1e-6)
        assert by_mode["ga_merge"].dev_max_abs is not None

    def test_cached_mode_rows_per_interval(self):
        cfg = tiny_config(modes=("ga_merge_cached",), cache_intervals=(1, 2))
        results = run_benchmark(cfg)
        assert [m.cache_interval for m in results] == [1, 2]

    def test_frames_sweep_quadratic_flops(self):
        cfg = tiny_config(modes=("baseline",), frames_sweep=(2, 3, 4))
        results = run_benchmark(cfg)
        d, layers_global = 32, 1
        for m, n in zip(results, (2, 3, 4)):
            seq = n * 9  # 4 patch + 5 special tokens per frame
            assert m.tokens_total == seq
            assert m.global_attn_flops == count_attention_flops(seq, d, 4, layers_global)

    def test_deterministic_counts_across_runs(self):
        a = run_benchmark(tiny_config())
        b = run_benchmark(tiny_config())
        for ma, mb in zip(a, b):
            assert ma.tokens_src == mb.tokens_src
            assert ma.global_attn_flops == mb.global_attn_flops
            assert ma.keep_ratio == mb.keep_ratio

    def test_repetitions_median(self):
        cfg = tiny_config(repetitions=3, modes=("baseline",))
        (m,) = run_benchmark(cfg)
        assert m.total_ms > 0.0

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            tiny_config(modes=("warp_drive",))

    def test_image_directory_source(self, tmp_path, rng):
        for i in range(3):
            write_pgm_bytes(
                tmp_path / f"frame{i}.pgm",
                rng.integers(0, 256, (28, 28), dtype=np.uint8),
            )
        cfg = tiny_config(scene=str(tmp_path), frames_sweep=(3,))
        results = run_benchmark(cfg)
        assert results[0].n_frames == 3

    def test_image_directory_default_sweep_uses_all(self, tmp_path, rng):
        for i in range(2):
            write_pgm_bytes(
                tmp_path / f"frame{i}.pgm",
                rng.integers(0, 256, (28, 28), dtype=np.uint8),
            )
        results = run_benchmark(tiny_config(scene=str(tmp_path), modes=("baseline",)))
        assert results[0].n_frames == 2

    def test_missing_images_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="images"):
            run_benchmark(tiny_config(scene=str(tmp_path), frames_sweep=(2,)))


class TestEmitReport:
    def _roundtrip_fields(self, metrics, tmp_path):
        jpath = tmp_path / "report.json"
        cpath = tmp_path / "report.csv"
        emit_report(metrics, "json", jpath)
        emit_report(metrics, "csv", cpath)
        jdata = json.loads(jpath.read_text())
        with open(cpath, newline="") as fh:
            rows = list(csv.reader(fh))
        return jdata, rows

    def test_json_csv_field_for_field(self, tmp_path):
        metrics = run_benchmark(tiny_config())
        jdata, rows = self._roundtrip_fields(metrics, tmp_path)
        assert rows[0] == list(CSV_FIELDS)
        assert len(rows) == len(jdata) + 1
        for obj, row in zip(jdata, rows[1:]):
            cells = dict(zip(rows[0], row))
            assert cells["version"] == "1"
            for key, value in obj.items():
                cell = cells[key]
                if value is None:
                    assert cell == ""
                elif isinstance(value, bool):
                    raise AssertionError("no boolean fields expected")
                elif isinstance(value, int):
                    assert int(cell) == value
                elif isinstance(value, float):
                    assert float(cell) == value
                else:
                    assert cell == str(value)

    def test_empty_report(self, tmp_path):
        jdata, rows = self._roundtrip_fields([], tmp_path)
        assert jdata == []
        assert rows == [list(CSV_FIELDS)]

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([], "yaml", tmp_path / "x.yaml")


class TestConfigFile:
    def test_full_roundtrip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "\n".join(
                [
                    "# desk run",
                    "scene = synthetic",
                    "texture = checker",
                    "height = 28",
                    "width = 28",
                    "n_frames = 3",
                    "overlap_shift_px = 0",
                    "layers = 2",
                    "heads = 4",
                    "embed_dim = 32",
                    "modes = baseline,ga_merge_cached",
                    "cache_intervals = 2",
                    "repetitions = 1",
                    "report_format = csv",
                    f"output = {tmp_path / 'out.csv'}",
                ]
            )
        )
        cfg = load_config_file(path)
        assert isinstance(cfg.scene, SceneSpec)
        assert cfg.scene.texture == "checker"
        assert cfg.model.embed_dim == 32
        assert cfg.modes == ("baseline", "ga_merge_cached")
        results = run_benchmark(cfg)
        assert (tmp_path / "out.csv").exists()
        assert len(results) == 2

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("warp = 9\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config_file(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("layers = 2\nlayers = 4\n")
        with pytest.raises(ValueError, match="duplicate"):
            load_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "junk.cfg"
        path.write_text("layers\n")
        with pytest.raises(ValueError, match="key=value"):
            load_config_file(path)


class TestCli:
    def test_run_subcommand(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "height = 28\nwidth = 28\nn_frames = 2\noverlap_shift_px = 0\n"
            "layers = 2\nheads = 4\nembed_dim = 32\n"
            f"modes = baseline,ga_merge\noutput = {out}\n"
        )
        assert cli_main(["run", str(cfg)]) == 0
        data = json.loads(out.read_text())
        assert {m["mode"] for m in data} == {"baseline", "ga_merge"}
        assert "keep=" in capsys.readouterr().out

    def test_dump_maps_subcommand(self, tmp_path, rng):
        img_dir = tmp_path / "imgs"
        img_dir.mkdir()
        for i in range(2):
            write_pgm_bytes(
                img_dir / f"f{i}.pgm", rng.integers(0, 256, (28, 28), dtype=np.uint8)
            )
        out_dir = tmp_path / "maps"
        assert cli_main(["dump-maps", str(img_dir), "--out", str(out_dir), "--embed-dim", "32"]) == 0
        names = sorted(p.name for p in out_dir.iterdir())
        assert "frame000_ga.pgm" in names
        assert "frame001_labels.pgm" in names
        assert len(names) == 2 * 3 + 2

    def test_dump_maps_empty_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert cli_main(["dump-maps", str(tmp_path / "empty")]) == 1

    def test_sweep_subcommand(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = cli_main(
            [
                "sweep",
                "--frames", "2,3",
                "--modes", "baseline,ga_merge_cached",
                "--height", "28", "--width", "28",
                "--shift", "0",
                "--layers", "2", "--embed-dim", "32",
                "--cache-interval", "2",
                "--out", str(out), "--format", "csv",
            ]
        )
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 4  # header + 2 modes x 2 frame counts
