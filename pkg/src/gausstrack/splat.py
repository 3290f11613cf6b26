"""CPU weight rasterizer.

For each view, determines which pixels each Gaussian covers and with what
alpha-blending weight (alpha * transmittance), which is exactly what the
per-view motion solver consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CameraView, Gaussian3D, quat_to_matrix, DEPTH_CUTOFF
from .errors import DegenerateCovariance

ALPHA_CUTOFF_DEFAULT = 1.0 / 255.0
ALPHA_CLAMP = 0.999
EARLY_STOP_TRANSMITTANCE = 1e-4
DET_FLOOR = 1e-12
SIGMA_RADIUS = 3.0


@dataclass(frozen=True)
class PixelContribution:
    gaussian_id: int
    pixel: tuple  # (ix, iy)
    alpha: float
    transmittance: float


@dataclass
class WeightMap:
    """All surviving per-pixel contributions of one view.

    Parallel arrays, sorted by pixel (row-major), then front-to-back by depth
    (ties broken by gaussian id).
    """

    view_id: int
    width: int
    height: int
    pixel_x: np.ndarray       # int32
    pixel_y: np.ndarray       # int32
    gaussian_id: np.ndarray   # int64
    alpha: np.ndarray         # float64
    transmittance: np.ndarray  # float64
    depth: np.ndarray         # float64
    degenerate_ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.gaussian_id)

    def contributions(self):
        for i in range(len(self.gaussian_id)):
            yield PixelContribution(
                int(self.gaussian_id[i]),
                (int(self.pixel_x[i]), int(self.pixel_y[i])),
                float(self.alpha[i]), float(self.transmittance[i]))

    def dump(self, path):
        """One line per contribution: view px py gid alpha transmittance."""
        with open(path, "w") as f:
            for i in range(len(self.gaussian_id)):
                f.write(f"{self.view_id} {self.pixel_x[i]} {self.pixel_y[i]} "
                        f"{self.gaussian_id[i]} {self.alpha[i]:.9g} "
                        f"{self.transmittance[i]:.9g}\n")


def invert_2x2(cov2, det_floor=DET_FLOOR):
    """Inverse of a symmetric 2x2 matrix with a determinant floor."""
    cov2 = np.asarray(cov2, dtype=np.float64)
    det = cov2[0, 0] * cov2[1, 1] - cov2[0, 1] * cov2[1, 0]
    if det < det_floor:
        raise DegenerateCovariance(f"det {det} below floor {det_floor}")
    return np.array([[cov2[1, 1], -cov2[0, 1]],
                     [-cov2[1, 0], cov2[0, 0]]]) / det


def _project_all(view: CameraView, gaussians):
    """Batch-project Gaussian means and covariances into a view.

    Returns (mean2 (N,2), depth (N,), cov2 (N,2,2), in_front (N,) bool).
    """
    n = len(gaussians)
    means = np.array([g.mean for g in gaussians]).reshape(n, 3)
    scales = np.array([g.scale for g in gaussians]).reshape(n, 3)
    rots = np.array([quat_to_matrix(g.rotation)
                     for g in gaussians]).reshape(n, 3, 3)

    pc = means @ view.rotation.T + view.translation
    z = pc[:, 2]
    in_front = z > DEPTH_CUTOFF
    zs = np.where(in_front, z, 1.0)

    mean2 = np.stack([view.fx * pc[:, 0] / zs + view.cx,
                      view.fy * pc[:, 1] / zs + view.cy], axis=1)

    # M = J @ R_world_to_cam, per Gaussian
    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = view.fx / zs
    j[:, 1, 1] = view.fy / zs
    j[:, 0, 2] = -view.fx * pc[:, 0] / (zs * zs)
    j[:, 1, 2] = -view.fy * pc[:, 1] / (zs * zs)
    m = j @ view.rotation

    cov3 = rots * (scales ** 2)[:, None, :] @ np.transpose(rots, (0, 2, 1))
    cov2 = m @ cov3 @ np.transpose(m, (0, 2, 1))
    cov2 = 0.5 * (cov2 + np.transpose(cov2, (0, 2, 1)))
    return mean2, z, cov2, in_front


def rasterize_weights(view: CameraView, gaussians, alpha_cutoff=ALPHA_CUTOFF_DEFAULT,
                      early_stop=EARLY_STOP_TRANSMITTANCE, view_id=0) -> WeightMap:
    """Scatter every visible Gaussian into its covered pixels and composite.

    Pixels inside the 3-sigma ellipse get alpha = opacity * G(x) (clamped to
    0.999); contributions below alpha_cutoff are dropped; per-pixel
    front-to-back compositing yields transmittances, stopping once residual
    transmittance falls below early_stop. Gaussians whose projected covariance
    determinant is below 1e-12 are skipped and reported via degenerate_ids.
    """
    if not (0.0 < alpha_cutoff < 1.0):
        raise ValueError(f"alpha_cutoff must be in (0, 1), got {alpha_cutoff}")
    w, h = view.width, view.height
    mean2, depth, cov2, in_front = _project_all(view, gaussians)

    px_parts, py_parts, gid_parts, a_parts, d_parts = [], [], [], [], []
    degenerate = []
    for gid, g in enumerate(gaussians):
        if not in_front[gid]:
            continue
        c = cov2[gid]
        det = c[0, 0] * c[1, 1] - c[0, 1] * c[0, 1]
        if det < DET_FLOOR:
            degenerate.append(gid)
            continue
        mx, my = mean2[gid]
        rx = SIGMA_RADIUS * np.sqrt(c[0, 0])
        ry = SIGMA_RADIUS * np.sqrt(c[1, 1])
        x0 = max(int(np.ceil(mx - rx)), 0)
        x1 = min(int(np.floor(mx + rx)), w - 1)
        y0 = max(int(np.ceil(my - ry)), 0)
        y1 = min(int(np.floor(my + ry)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        dx = (xs - mx)[None, :]
        dy = (ys - my)[:, None]
        # Mahalanobis distance^2 via the explicit 2x2 inverse
        inv = np.array([[c[1, 1], -c[0, 1]], [-c[0, 1], c[0, 0]]]) / det
        q = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
        alpha = np.minimum(g.opacity * np.exp(-0.5 * q), ALPHA_CLAMP)
        keep = (q <= SIGMA_RADIUS ** 2) & (alpha >= alpha_cutoff)
        if not np.any(keep):
            continue
        iy, ix = np.nonzero(keep)
        px_parts.append(xs[ix])
        py_parts.append(ys[iy])
        a_parts.append(alpha[keep])
        gid_parts.append(np.full(ix.size, gid, dtype=np.int64))
        d_parts.append(np.full(ix.size, depth[gid]))

    if not px_parts:
        empty = np.empty(0)
        return WeightMap(view_id, w, h, np.empty(0, np.int32), np.empty(0, np.int32),
                         np.empty(0, np.int64), empty, empty.copy(), empty.copy(),
                         degenerate)

    px = np.concatenate(px_parts).astype(np.int32)
    py = np.concatenate(py_parts).astype(np.int32)
    gid = np.concatenate(gid_parts)
    alpha = np.concatenate(a_parts)
    d = np.concatenate(d_parts)

    pix = py.astype(np.int64) * w + px
    order = np.lexsort((gid, d, pix))
    px, py, gid, alpha, d, pix = (px[order], py[order], gid[order], alpha[order],
                                  d[order], pix[order])

    # per-pixel transmittance: T_k = prod_{j<k in pixel} (1 - alpha_j)
    starts = np.empty(len(pix), dtype=bool)
    starts[0] = True
    np.not_equal(pix[1:], pix[:-1], out=starts[1:])
    log1m = np.log1p(-alpha)
    cs = np.cumsum(log1m)
    start_idx = np.maximum.accumulate(np.where(starts, np.arange(len(pix)), 0))
    seg_base = cs[start_idx] - log1m[start_idx]
    trans = np.exp((cs - log1m) - seg_base)
    trans[starts] = 1.0

    keep = trans >= early_stop
    return WeightMap(view_id, w, h, px[keep], py[keep], gid[keep], alpha[keep],
                     trans[keep], d[keep], degenerate)
