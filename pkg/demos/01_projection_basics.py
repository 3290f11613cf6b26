"""Projection basics: 3D Gaussians, pinhole cameras, and 2D footprints.

Walks through the geometric core: build a Gaussian, place a camera, project
the mean, and push the full covariance through the projection linearization.
"""

import numpy as np

from gausstrack import CameraView, Gaussian3D
from gausstrack.core import (covariance3d, project_gaussian, project_point,
                             projection_jacobian, quat_normalize)

# ---------------------------------------------------------------------------
# A Gaussian is a mean, a unit quaternion, per-axis scales, and an opacity.

g = Gaussian3D(mean=[0.2, -0.1, 0.0],
               rotation=quat_normalize([0.9, 0.1, 0.3, 0.0]),
               scale=[0.30, 0.15, 0.05],
               opacity=0.8)
print("Gaussian mean:", g.mean)
print("world covariance:\n", covariance3d(g).matrix.round(4))

# ---------------------------------------------------------------------------
# A camera looking down the +z axis from 5 units away.

cam = CameraView(rotation=np.eye(3), translation=[0.0, 0.0, 5.0],
                 fx=400.0, fy=400.0, cx=160.0, cy=120.0, width=320, height=240)

mean2, depth = project_point(cam, g.mean)
print("\nprojected mean (pixels):", mean2.round(2), " depth:", depth)

# The 2x3 linearization maps small world displacements to pixel shifts; it
# also carries the 3D covariance onto the image plane.
m = projection_jacobian(cam, g.mean)
print("projection linearization:\n", m.round(3))

g2, _ = project_gaussian(cam, g)
print("projected 2x2 covariance (pixels^2):\n", g2.cov2.round(3))

# ---------------------------------------------------------------------------
# Sanity check the linearization against finite differences.

eps = 1e-6
for k, axis in enumerate("xyz"):
    dp = np.zeros(3)
    dp[k] = eps
    numeric = (project_point(cam, g.mean + dp)[0]
               - project_point(cam, g.mean - dp)[0]) / (2 * eps)
    print(f"d(pixel)/d{axis}: analytic {m[:, k].round(5)} "
          f"numeric {numeric.round(5)}")

# ---------------------------------------------------------------------------
# Moving the Gaussian closer grows the footprint quadratically in 1/z.

print("\nfootprint area vs distance:")
for z in (8.0, 5.0, 3.0, 2.0):
    cam_z = CameraView(np.eye(3), [0, 0, z], 400.0, 400.0, 160.0, 120.0,
                       320, 240)
    g2z, _ = project_gaussian(cam_z, g)
    area = np.pi * np.sqrt(max(np.linalg.det(g2z.cov2), 0.0))
    print(f"  z = {z:4.1f}  1-sigma ellipse area = {area:8.2f} px^2")
