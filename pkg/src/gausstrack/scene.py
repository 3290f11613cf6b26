"""Synthetic scene generation and the oracle tracker.

Scenes are constructed, not simulated: each Gaussian follows an exact rigid
trajectory (per-frame translation plus rotation about its own center), so
every downstream stage can be checked against ground truth. The oracle
tracker replaces a neural point tracker by transporting each pixel on the
depth plane of its dominant Gaussian using that Gaussian's known motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (CameraView, Gaussian3D, quat_multiply, quat_normalize,
                   quat_to_matrix)
from .errors import InvalidConfig
from .motion2d import TrackField
from .splat import WeightMap, rasterize_weights


@dataclass(frozen=True)
class RigidStep:
    """Per-frame rigid increment of one Gaussian (about its own center)."""

    translation: np.ndarray  # (3,)
    rotation: np.ndarray     # quaternion applied once per frame


@dataclass
class SceneSequence:
    cameras: list
    frames: list          # frames[t] is a list of Gaussian3D
    motion: list | None   # per-Gaussian RigidStep, None for loaded scenes

    @property
    def n_frames(self):
        return len(self.frames)

    @property
    def n_gaussians(self):
        return len(self.frames[0])

    def relative_motion(self, first_frame, target_frame, gaussian_id):
        """Exact rigid motion of one Gaussian between two stored frames.

        Returns (rel_rotation 3x3, mean_first, mean_target) such that a point
        p rigidly attached to the Gaussian maps to
        rel @ (p - mean_first) + mean_target.
        """
        g0 = self.frames[first_frame][gaussian_id]
        g1 = self.frames[target_frame][gaussian_id]
        rel = quat_to_matrix(g1.rotation) @ quat_to_matrix(g0.rotation).T
        return rel, g0.mean, g1.mean


def _ring_camera(angle, radius, height, focal, width, img_height):
    position = np.array([radius * np.cos(angle), radius * np.sin(angle), height])
    forward = -position / np.linalg.norm(position)  # look at origin
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    r = np.stack([right, down, forward])  # world -> camera rows
    return CameraView(r, -r @ position, focal, focal,
                      width / 2.0, img_height / 2.0, width, img_height)


def generate_scene(seed, n_gaussians, n_views, n_frames, mover_fraction=0.3,
                   translate_mag=0.02, rotate_deg=2.0, scene_radius=1.0,
                   ring_radius=6.0, focal=800.0, width=960, height=540,
                   scale_range=(0.004, 0.008), opacity_range=(0.95, 0.999)) -> SceneSequence:
    """Deterministic random scene: ring cameras around a ball of Gaussians.

    A mover_fraction subset forms a compact cluster offset from the static
    background (a coherent foreground object): every mover translates by the
    same translate_mag world units per frame and rotates about its own
    center by rotate_deg degrees per frame. All Gaussians stay in front of
    every camera in every frame.
    """
    if n_views < 3:
        raise InvalidConfig(f"need n_views >= 3, got {n_views}")
    if n_gaussians < 10:
        raise InvalidConfig(f"need n_gaussians >= 10, got {n_gaussians}")
    if n_frames < 1:
        raise InvalidConfig("need n_frames >= 1")
    rng = np.random.default_rng(seed)

    cameras = [_ring_camera(2 * np.pi * v / n_views, ring_radius,
                            0.3 * ring_radius, focal, width, height)
               for v in range(n_views)]

    n_movers = int(round(mover_fraction * n_gaussians))
    n_static = n_gaussians - n_movers

    def _ball(center, radius, count):
        pts = rng.normal(size=(count, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        pts *= radius * rng.uniform(size=(count, 1)) ** (1.0 / 3.0)
        return pts + center

    means = np.empty((n_gaussians, 3))
    means[:n_static] = _ball(np.zeros(3), scene_radius, n_static)
    if n_movers:
        # the mover cluster sits beside and above the background so its
        # spatial neighborhoods are motion-consistent (a foreground object)
        # and no ring camera sees it through the background
        angle = rng.uniform(0, 2 * np.pi)
        cluster_center = scene_radius * np.array(
            [1.6 * np.cos(angle), 1.6 * np.sin(angle), 0.85])
        means[n_static:] = _ball(cluster_center, 0.3 * scene_radius, n_movers)

    quats = rng.normal(size=(n_gaussians, 4))
    scales = rng.uniform(*scale_range, size=(n_gaussians, 3))
    opacities = rng.uniform(*opacity_range, size=n_gaussians)
    first = [Gaussian3D(means[i], quats[i], scales[i], opacities[i])
             for i in range(n_gaussians)]

    motion = [RigidStep(np.zeros(3), np.array([1.0, 0, 0, 0]))
              for _ in range(n_gaussians)]
    if n_movers:
        direction = rng.normal(size=3)
        # guarantee a vertical component so the screen-space motion never
        # degenerates in a view whose optical axis aligns with it
        direction[2] = np.sign(direction[2]) * max(abs(direction[2]), 1.0)
        direction /= np.linalg.norm(direction)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        half = np.deg2rad(rotate_deg) / 2.0
        q = quat_normalize(np.concatenate([[np.cos(half)], np.sin(half) * axis]))
        step = RigidStep(translate_mag * direction, q)
        for i in range(n_static, n_gaussians):
            motion[i] = step

    frames = [first]
    for t in range(1, n_frames):
        prev = frames[-1]
        cur = []
        for i, g in enumerate(prev):
            step = motion[i]
            cur.append(Gaussian3D(g.mean + step.translation,
                                  quat_multiply(step.rotation, g.rotation),
                                  g.scale, g.opacity))
        frames.append(cur)

    for t, frame in enumerate(frames):
        pts = np.array([g.mean for g in frame])
        for cam in cameras:
            pc = pts @ cam.rotation.T + cam.translation
            z = pc[:, 2]
            if np.any(z < 0.1 * ring_radius):
                raise InvalidConfig(
                    f"frame {t}: Gaussians too close to a camera; reduce "
                    "motion or scene_radius")
            u = cam.fx * pc[:, 0] / z + cam.cx
            v = cam.fy * pc[:, 1] / z + cam.cy
            if (np.any(u < 1) or np.any(u > cam.width - 2)
                    or np.any(v < 1) or np.any(v > cam.height - 2)):
                raise InvalidConfig(
                    f"frame {t}: Gaussians project outside the image; "
                    "shrink the scene or widen the camera")
    return SceneSequence(cameras, frames, motion)


def dominant_gaussians(weightmap: WeightMap):
    """Per-pixel id and depth of the contribution with the largest alpha*T.

    Returns (gaussian_id (H,W) int64 with -1 for empty pixels,
    depth (H,W) float64).
    """
    h, w = weightmap.height, weightmap.width
    gid_img = np.full((h, w), -1, dtype=np.int64)
    depth_img = np.zeros((h, w))
    if len(weightmap) == 0:
        return gid_img, depth_img
    weight = weightmap.alpha * weightmap.transmittance
    pix = weightmap.pixel_y.astype(np.int64) * w + weightmap.pixel_x
    order = np.lexsort((weightmap.gaussian_id, -weight, pix))
    first = np.empty(len(order), dtype=bool)
    first[0] = True
    sorted_pix = pix[order]
    np.not_equal(sorted_pix[1:], sorted_pix[:-1], out=first[1:])
    sel = order[first]
    gid_img[weightmap.pixel_y[sel], weightmap.pixel_x[sel]] = \
        weightmap.gaussian_id[sel]
    depth_img[weightmap.pixel_y[sel], weightmap.pixel_x[sel]] = \
        weightmap.depth[sel]
    return gid_img, depth_img


def oracle_track(scene: SceneSequence, view, target_frame, noise_sigma_px=0.0,
                 seed=0, first_frame=0, weightmap=None,
                 alpha_cutoff=1.0 / 255.0) -> TrackField:
    """Ground-truth tracks for one view and target frame.

    Each first-frame pixel is back-projected onto the depth plane of its
    dominant Gaussian, moved by that Gaussian's exact rigid motion, and
    reprojected. Pixels with no contribution are invalid. Noise is drawn
    from a generator keyed on (seed, view, target_frame), independent of
    evaluation order.
    """
    if not (0 <= target_frame < scene.n_frames):
        raise InvalidConfig(f"target_frame {target_frame} out of range")
    cam = scene.cameras[view]
    if weightmap is None:
        weightmap = rasterize_weights(cam, scene.frames[first_frame],
                                      alpha_cutoff, view_id=view)
    gid_img, depth_img = dominant_gaussians(weightmap)
    h, w = cam.height, cam.width
    valid = gid_img >= 0

    ys, xs = np.mgrid[0:h, 0:w]
    target = np.stack([xs, ys], axis=-1).astype(np.float64)

    vy, vx = np.nonzero(valid)
    if len(vy):
        z = depth_img[vy, vx]
        pc = np.stack([(vx - cam.cx) / cam.fx * z,
                       (vy - cam.cy) / cam.fy * z, z], axis=1)
        pw = (pc - cam.translation) @ cam.rotation  # R^T (pc - t)

        gids = gid_img[vy, vx]
        uniq, inv = np.unique(gids, return_inverse=True)
        rels = np.empty((len(uniq), 3, 3))
        mu0s = np.empty((len(uniq), 3))
        mu1s = np.empty((len(uniq), 3))
        for k, gid in enumerate(uniq):
            rels[k], mu0s[k], mu1s[k] = scene.relative_motion(
                first_frame, target_frame, gid)
        moved = np.einsum("nij,nj->ni", rels[inv], pw - mu0s[inv]) + mu1s[inv]
        pc2 = moved @ cam.rotation.T + cam.translation
        target[vy, vx, 0] = cam.fx * pc2[:, 0] / pc2[:, 2] + cam.cx
        target[vy, vx, 1] = cam.fy * pc2[:, 1] / pc2[:, 2] + cam.cy

    if noise_sigma_px > 0:
        rng = np.random.default_rng([seed, view, target_frame])
        noise = rng.normal(scale=noise_sigma_px, size=(h, w, 2))
        target[valid] += noise[valid]
    return TrackField(view, w, h, target, valid)
