"""The weight rasterizer: which pixels does each Gaussian own, and how much?

Rasterizes a tiny synthetic scene, renders an ASCII coverage map, and checks
the alpha-compositing identity per pixel.
"""

import numpy as np

from gausstrack import generate_scene, rasterize_weights

# larger-than-default footprints so the terminal render shows overlap
scene = generate_scene(seed=5, n_gaussians=25, n_views=4, n_frames=1,
                       scale_range=(0.05, 0.10))
cam = scene.cameras[0]
wm = rasterize_weights(cam, scene.frames[0], view_id=0)

print(f"view 0: {len(wm)} surviving contributions over "
      f"{cam.width}x{cam.height} pixels")
print(f"degenerate (skipped) Gaussians: {wm.degenerate_ids}")

# ---------------------------------------------------------------------------
# ASCII render of total opacity per pixel, downsampled for the terminal.

opacity = np.zeros((cam.height, cam.width))
np.add.at(opacity, (wm.pixel_y, wm.pixel_x), wm.alpha * wm.transmittance)
step_y, step_x = cam.height // 30, cam.width // 72
tiles = opacity[:30 * step_y, :72 * step_x]
tiles = tiles.reshape(30, step_y, 72, step_x).mean(axis=(1, 3))
ramp = " .:-=+*#%@"
print("\ncomposited opacity (view 0):")
for row in tiles:
    print("".join(ramp[min(int(v * (len(ramp) - 1) / max(tiles.max(), 1e-9)),
                           len(ramp) - 1)] for v in row))

# ---------------------------------------------------------------------------
# Per pixel, the blending weights alpha * T telescope:
#     sum(alpha_i * T_i) == 1 - prod(1 - alpha_i)
# i.e. total opacity equals one minus the surviving transmittance.

pix = wm.pixel_y.astype(np.int64) * wm.width + wm.pixel_x
boundaries = np.flatnonzero(np.diff(pix)) + 1
worst = 0.0
for idx in np.split(np.arange(len(pix)), boundaries):
    lhs = np.sum(wm.alpha[idx] * wm.transmittance[idx])
    rhs = 1.0 - np.prod(1.0 - wm.alpha[idx])
    worst = max(worst, abs(lhs - rhs))
print(f"\ncompositing identity: worst per-pixel deviation {worst:.2e}")

# ---------------------------------------------------------------------------
# Depth ordering: contributions in a pixel are sorted front to back, so the
# first one composites against full transmittance.

deepest = np.argmax(np.bincount(pix))
idx = np.flatnonzero(pix == deepest)
print(f"\nbusiest pixel has {len(idx)} contributors:")
print(f"{'gaussian':>9} {'depth':>8} {'alpha':>8} {'transmit':>9}")
for i in idx:
    print(f"{wm.gaussian_id[i]:>9} {wm.depth[i]:>8.3f} "
          f"{wm.alpha[i]:>8.4f} {wm.transmittance[i]:>9.4f}")
