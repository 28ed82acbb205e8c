"""Tokenize a synthetic scene and look at the per-token importance maps.

The scene has a checkered left half and a flat right half, so the importance
map should light up on the left and stay dark on the right. Map rasters are
written as PGM files under demo_out/maps/.
"""

import numpy as np

from gamerge import (
    SceneSpec,
    build_tokenizer_params,
    synth_scene,
    to_grayscale,
    tokenize,
)
from gamerge.gamap import (
    downsample_to_tokens,
    dump_maps,
    fuse_ga_map,
    gradient_magnitude,
    sobel_gradients,
    token_variance,
)

scene = SceneSpec(n_frames=4, height=112, width=112, overlap_shift_px=14, texture="mixed")
frames = synth_scene(scene, seed=0)
params = build_tokenizer_params(patch_size=14, embed_dim=64, channels=1, seed=0)

print(f"scene: {scene.n_frames} frames of {scene.height}x{scene.width}, texture={scene.texture}")

for frame in frames:
    grid = tokenize(frame, params)
    gray = to_grayscale(frame)

    gx, gy = sobel_gradients(gray)
    grad = downsample_to_tokens(gradient_magnitude(gx, gy), params.patch_size)
    var = token_variance(grid)
    ga = fuse_ga_map(grad, var, alpha=0.5, beta=0.5)

    h_t, w_t = ga.grid_shape
    left = ga.values[:, : w_t // 2].mean()
    right = ga.values[:, w_t // 2 :].mean()
    print(
        f"frame {frame.frame_index}: lattice {h_t}x{w_t}, "
        f"{grid.n_tokens} patch tokens + {grid.specials.shape[0]} specials | "
        f"mean importance left={left:.3f} right={right:.3f}"
    )
    dump_maps("demo_out/maps", frame.frame_index, grad, var, ga)

print("\ntop-left corner of frame 0's importance map:")
grid0 = tokenize(frames[0], params)
gray0 = to_grayscale(frames[0])
gx, gy = sobel_gradients(gray0)
grad0 = downsample_to_tokens(gradient_magnitude(gx, gy), params.patch_size)
ga0 = fuse_ga_map(grad0, token_variance(grid0))
with np.printoptions(precision=2, suppress=True):
    print(ga0.values[:4, :8])
print("\nwrote grad/var/ga PGM rasters to demo_out/maps/")
