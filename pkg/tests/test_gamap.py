import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from gamerge.gamap import (
    SOBEL_X,
    SOBEL_Y,
    GradMap,
    VarMap,
    compute_ga_map,
    downsample_to_tokens,
    dump_maps,
    fuse_ga_map,
    gradient_magnitude,
    minmax_normalize,
    sobel_gradients,
    token_variance,
)
from gamerge.ingest import (
    GrayImage,
    SceneSpec,
    TokenGrid,
    build_tokenizer_params,
    synth_scene,
    tokenize,
)
from gamerge.netpbm import read_pnm


def sobel_oracle(img, kernel):
    """Replicate-padded 3x3 correlation the slow, obvious way."""
    h, w = img.shape
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    acc += kernel[i, j] * padded[r + i, c + j]
            out[r, c] = acc
    return out


def local_variance_oracle(scalar):
    """3x3 replicate-padded E[x^2] - E[x]^2 by explicit windows."""
    h, w = scalar.shape
    padded = np.pad(scalar, 1, mode="edge")
    out = np.zeros_like(scalar)
    for r in range(h):
        for c in range(w):
            window = padded[r : r + 3, c : c + 3]
            out[r, c] = (window * window).mean() - window.mean() ** 2
    return np.maximum(out, 0.0)


def grid_from_tokens(tokens, h_t, w_t):
    return TokenGrid(
        tokens=tokens,
        specials=np.zeros((5, tokens.shape[1])),
        frame_index=0,
        grid_shape=(h_t, w_t),
    )


class TestSobel:
    def test_constant_image_zero_gradients(self):
        img = GrayImage(intensity=np.full((8, 9), 0.37))
        gx, gy = sobel_gradients(img)
        assert np.abs(gx).max() <= 1e-12
        assert np.abs(gy).max() <= 1e-12

    def test_horizontal_ramp(self):
        w = 20
        ramp = np.tile(np.arange(w) / w, (10, 1))
        gx, gy = sobel_gradients(GrayImage(intensity=ramp))
        assert gx[1:-1, 1:-1] == pytest.approx(8.0 / w, abs=1e-12)
        assert np.abs(gy).max() <= 1e-12

    def test_vertical_step(self):
        img = np.zeros((9, 16))
        step_col = 7
        img[:, step_col:] = 1.0
        gx, _ = sobel_gradients(GrayImage(intensity=img))
        oracle = sobel_oracle(img, SOBEL_X)
        np.testing.assert_allclose(gx, oracle, atol=1e-12)
        mags = np.abs(gx[4])
        peak = mags.max()
        assert mags[step_col - 1] == peak and mags[step_col] == peak
        assert np.all(mags[: step_col - 2] == 0.0)
        assert np.all(mags[step_col + 2 :] == 0.0)

    def test_matches_loop_oracle(self, rng):
        img = rng.normal(size=(7, 9))
        gx, gy = sobel_gradients(GrayImage(intensity=img))
        np.testing.assert_allclose(gx, sobel_oracle(img, SOBEL_X), atol=1e-12)
        np.testing.assert_allclose(gy, sobel_oracle(img, SOBEL_Y), atol=1e-12)

    def test_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            sobel_gradients(GrayImage(intensity=np.zeros((2, 5))))


class TestGradientMagnitude:
    def test_three_four_five(self):
        got = gradient_magnitude(np.array([[3.0]]), np.array([[4.0]]))
        assert got[0, 0] == pytest.approx(5.0, abs=1e-12)

    def test_zeros(self):
        got = gradient_magnitude(np.zeros((4, 4)), np.zeros((4, 4)))
        assert np.all(got == 0.0)

    def test_matches_sqrt_oracle(self, rng):
        gx = rng.normal(size=(5, 5))
        gy = rng.normal(size=(5, 5))
        want = np.sqrt(gx**2 + gy**2)
        np.testing.assert_allclose(gradient_magnitude(gx, gy), want, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes"):
            gradient_magnitude(np.zeros((3, 3)), np.zeros((3, 4)))


class TestDownsample:
    def test_constant(self):
        got = downsample_to_tokens(np.full((28, 42), 2.5), 14)
        assert got.values.shape == (2, 3)
        assert np.all(got.values == 2.5)

    def test_single_hot_patch(self):
        values = np.zeros((28, 28))
        values[14:, :14] = 1.0
        got = downsample_to_tokens(values, 14).values
        assert got[1, 0] == 1.0
        assert got.sum() == 1.0

    def test_matches_loop_oracle(self, rng):
        values = rng.normal(size=(21, 35))
        got = downsample_to_tokens(values, 7).values
        for r in range(3):
            for c in range(5):
                want = values[r * 7 : (r + 1) * 7, c * 7 : (c + 1) * 7].mean()
                assert got[r, c] == pytest.approx(want, abs=1e-12)

    def test_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            downsample_to_tokens(np.zeros((15, 14)), 14)


class TestTokenVariance:
    def test_identical_tokens(self, rng):
        token = rng.normal(size=8)
        grid = grid_from_tokens(np.tile(token, (12, 1)), 3, 4)
        assert np.all(token_variance(grid).values == 0.0)

    def test_single_token_lattice(self, rng):
        grid = grid_from_tokens(rng.normal(size=(1, 8)), 1, 1)
        assert token_variance(grid).values[0, 0] == 0.0

    def test_matches_local_variance_oracle(self, rng):
        tokens = rng.normal(size=(20, 16))
        grid = grid_from_tokens(tokens, 4, 5)
        scalar = tokens.mean(axis=1).reshape(4, 5)
        np.testing.assert_allclose(
            token_variance(grid).values, local_variance_oracle(scalar), atol=1e-9
        )

    def test_nonnegative(self, rng):
        tokens = rng.normal(size=(64, 8)) * 1e-8
        assert token_variance(grid_from_tokens(tokens, 8, 8)).values.min() >= 0.0

    def test_translation_covariance(self, rng):
        tokens = rng.normal(size=(6 * 9, 8)).reshape(6, 9, 8)
        shifted = np.roll(tokens, -1, axis=1)
        var_a = token_variance(grid_from_tokens(tokens.reshape(-1, 8), 6, 9)).values
        var_b = token_variance(grid_from_tokens(shifted.reshape(-1, 8), 6, 9)).values
        # interior columns shift by one; replicate boundary excluded
        np.testing.assert_allclose(var_b[:, 1:-2], var_a[:, 2:-1], atol=1e-12)


class TestMinmaxNormalize:
    def test_worked_example(self):
        got = minmax_normalize(np.array([2.0, 4.0, 6.0]))
        np.testing.assert_allclose(got, [0.0, 0.5, 1.0], atol=1e-12)

    def test_constant_maps_to_zero(self):
        assert np.all(minmax_normalize(np.full((3, 3), 7.0)) == 0.0)

    @given(
        values=hnp.arrays(
            np.float64,
            st.tuples(st.integers(1, 8), st.integers(1, 8)),
            elements=st.floats(-1e6, 1e6),
        )
    )
    @settings(max_examples=80, deadline=None)
    def test_range_property(self, values):
        got = minmax_normalize(values)
        if values.max() == values.min():
            assert np.all(got == 0.0)
        else:
            assert got.min() == 0.0
            assert got.max() == 1.0


class TestFuse:
    def test_alpha_only_projects_grad(self, rng):
        grad = GradMap(values=rng.uniform(size=(4, 4)))
        var = VarMap(values=rng.uniform(size=(4, 4)))
        got = fuse_ga_map(grad, var, alpha=1.0, beta=0.0)
        np.testing.assert_array_equal(got.values, minmax_normalize(grad.values))

    def test_beta_only_projects_var(self, rng):
        grad = GradMap(values=rng.uniform(size=(4, 4)))
        var = VarMap(values=rng.uniform(size=(4, 4)))
        got = fuse_ga_map(grad, var, alpha=0.0, beta=1.0)
        np.testing.assert_array_equal(got.values, minmax_normalize(var.values))

    def test_both_zero_weights_rejected(self):
        maps = GradMap(values=np.ones((2, 2))), VarMap(values=np.ones((2, 2)))
        with pytest.raises(ValueError, match="weight"):
            fuse_ga_map(*maps, alpha=0.0, beta=0.0)

    def test_output_in_unit_interval(self, rng):
        grad = GradMap(values=rng.uniform(0, 9, size=(6, 7)))
        var = VarMap(values=rng.uniform(0, 2, size=(6, 7)))
        got = fuse_ga_map(grad, var, 0.7, 0.3).values
        assert got.min() == 0.0 and got.max() == 1.0

    def test_homogeneous_in_weights(self, rng):
        grad = GradMap(values=rng.uniform(size=(5, 5)))
        var = VarMap(values=rng.uniform(size=(5, 5)))
        base = fuse_ga_map(grad, var, 0.5, 0.5).values
        # power-of-two scaling is exact in floating point
        doubled = fuse_ga_map(grad, var, 1.0, 1.0).values
        np.testing.assert_array_equal(doubled, base)
        scaled = fuse_ga_map(grad, var, 0.5 * 0.7, 0.5 * 0.7).values
        np.testing.assert_allclose(scaled, base, atol=1e-12)

    def test_textured_half_outscores_flat_half(self):
        frame = synth_scene(SceneSpec(1, 56, 112, texture="mixed"), seed=3)[0]
        params = build_tokenizer_params(14, 16, 1, seed=0)
        ga = compute_ga_map(frame, tokenize(frame, params))
        w_t = ga.values.shape[1]
        left = ga.values[:, : w_t // 2].mean()
        right = ga.values[:, w_t // 2 :].mean()
        assert left > right


class TestPipeline:
    def test_dump_maps_roundtrip(self, tmp_path, rng):
        grad = GradMap(values=rng.uniform(size=(4, 6)))
        var = VarMap(values=rng.uniform(size=(4, 6)))
        ga = fuse_ga_map(grad, var)
        paths = dump_maps(tmp_path, 0, grad, var, ga)
        assert len(paths) == 3
        raster = read_pnm(paths[2])
        assert raster.shape == (4, 6)
        want = np.round(ga.values * 255).astype(np.uint8)
        assert np.array_equal(raster, want)

    def test_throughput_64_frames(self):
        # full map pipeline for 64 frames at 392x518 should stay under a
        # second on one core
        frames = synth_scene(
            SceneSpec(64, 392, 518, overlap_shift_px=7, texture="mixed"), seed=0
        )
        params = build_tokenizer_params(14, 64, 1, seed=0)
        grids = [tokenize(f, params) for f in frames]
        start = time.perf_counter()
        for f, g in zip(frames, grids):
            compute_ga_map(f, g)
        assert time.perf_counter() - start < 1.0
