"""Motion regularization: static detection, neighborhood median filtering,
and propagation of motion to Gaussians whose own motion was unsolvable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from .core import Gaussian3D, matrix_to_quat, quat_to_matrix
from .motion2d import Status
from .multiview import MotionUpdate

KNN_K_DEFAULT = 8
MIN_HIT_PIXELS_DEFAULT = 9
STATIC_FRACTION_DEFAULT = 0.9
STATIC_MIN_VIEWS_DEFAULT = 2
SCALE_CLAMP = 1e-9


@dataclass(frozen=True)
class StaticStats:
    """Per-view (pixel_count, static_pixel_count) tallies for one Gaussian."""

    gaussian_id: int
    per_view: tuple  # of (pixel_count, static_pixel_count)


@dataclass(frozen=True)
class NeighborIndex:
    positions: np.ndarray  # (N, 3)
    k: int
    adjacency: np.ndarray  # (N, min(k, N-1)) int


def build_knn(positions, k=KNN_K_DEFAULT) -> NeighborIndex:
    """Exact k-nearest neighbors by Euclidean distance, ties by ascending id.

    Brute-force all-pairs; adjacency lists are sorted by ascending distance.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    if n < 2:
        raise ValueError("need at least 2 positions")
    kk = min(k, n - 1)
    ids = np.arange(n)
    adjacency = np.empty((n, kk), dtype=np.int64)
    for i in range(n):
        d = np.linalg.norm(positions - positions[i], axis=1)
        d[i] = np.inf
        order = np.lexsort((ids, d))  # distance first, then id
        adjacency[i] = order[:kk]
    return NeighborIndex(positions, k, adjacency)


def detect_static(stats: StaticStats, min_hit_pixels=MIN_HIT_PIXELS_DEFAULT,
                  static_fraction=STATIC_FRACTION_DEFAULT,
                  min_views=STATIC_MIN_VIEWS_DEFAULT) -> bool:
    """True iff enough views see the Gaussian well-hit and almost fully static.

    A view qualifies when pixel_count > min_hit_pixels and
    static_pixel_count / pixel_count > static_fraction (strict inequalities).
    """
    qualifying = sum(
        1 for pixel_count, static_count in stats.per_view
        if pixel_count > min_hit_pixels
        and static_count > static_fraction * pixel_count)
    return qualifying >= min_views


def detect_static_all(pixel_counts, static_counts,
                      min_hit_pixels=MIN_HIT_PIXELS_DEFAULT,
                      static_fraction=STATIC_FRACTION_DEFAULT,
                      min_views=STATIC_MIN_VIEWS_DEFAULT):
    """Vectorized detect_static over (G, V) count arrays."""
    pixel_counts = np.asarray(pixel_counts)
    static_counts = np.asarray(static_counts)
    qualifying = ((pixel_counts > min_hit_pixels)
                  & (static_counts > static_fraction * pixel_counts))
    return qualifying.sum(axis=1) >= min_views


def _nearest_rotation(m):
    """Project a matrix to the nearest rotation (polar decomposition)."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def median_filter(updates, index: NeighborIndex, frame1) -> list:
    """Replace each solved Gaussian's deltas by the componentwise median over
    itself and its solved neighbors.

    Deltas are taken against frame 1: position difference, rotation-matrix
    difference (projected back to a rotation after the median), and scale
    difference. Static and unsolvable entries pass through untouched.
    """
    n = len(updates)
    solved = np.array([u.status == Status.SOLVED for u in updates])
    r1 = np.array([quat_to_matrix(g.rotation) for g in frame1])
    dr = np.array([quat_to_matrix(u.new_rotation) - r1[i]
                   for i, u in enumerate(updates)])
    dmu = np.array([u.delta_mean for u in updates])
    ds = np.array([u.new_scale - frame1[i].scale for i, u in enumerate(updates)])

    out = list(updates)
    for i in range(n):
        if not solved[i]:
            continue
        nbrs = index.adjacency[i]
        sample = np.concatenate([[i], nbrs[solved[nbrs]]])
        med_mu = np.median(dmu[sample], axis=0)
        med_dr = np.median(dr[sample], axis=0)
        med_ds = np.median(ds[sample], axis=0)
        rot = _nearest_rotation(r1[i] + med_dr)
        scale = np.maximum(frame1[i].scale + med_ds, SCALE_CLAMP)
        out[i] = MotionUpdate(updates[i].gaussian_id, med_mu,
                              matrix_to_quat(rot), scale, Status.SOLVED)
    return out


def _circular_mean(angles):
    return np.arctan2(np.mean(np.sin(angles), axis=0),
                      np.mean(np.cos(angles), axis=0))


def propagate(updates, index: NeighborIndex, static_flags, frame1,
              average="mean") -> list:
    """Pin static Gaussians to frame 1 and fill unsolvable ones from neighbors.

    Unsolvable Gaussians with at least one solved non-static neighbor get the
    neighbor average of position deltas and scale deltas, and a relative
    rotation averaged per intrinsic-XYZ Euler angle with a circular mean.
    """
    if average not in ("mean", "median"):
        raise ValueError(f"average must be 'mean' or 'median', got {average}")
    n = len(updates)
    static_flags = np.asarray(static_flags, dtype=bool)
    source = np.array([u.status == Status.SOLVED for u in updates]) & ~static_flags

    dmu = np.array([u.delta_mean for u in updates])
    ds = np.array([u.new_scale - frame1[i].scale for i, u in enumerate(updates)])
    rel_euler = np.zeros((n, 3))
    for i, u in enumerate(updates):
        if source[i]:
            rel = (quat_to_matrix(u.new_rotation)
                   @ quat_to_matrix(frame1[i].rotation).T)
            rel_euler[i] = ScipyRotation.from_matrix(rel).as_euler("XYZ")

    reduce = np.mean if average == "mean" else np.median
    out = list(updates)
    for i in range(n):
        if static_flags[i]:
            out[i] = MotionUpdate(updates[i].gaussian_id, np.zeros(3),
                                  frame1[i].rotation.copy(),
                                  frame1[i].scale.copy(), Status.STATIC)
            continue
        if updates[i].status != Status.UNSOLVABLE:
            continue
        nbrs = index.adjacency[i]
        nbrs = nbrs[source[nbrs]]
        if len(nbrs) == 0:
            continue  # stays UNSOLVABLE at frame-1 parameters
        delta_mean = reduce(dmu[nbrs], axis=0)
        scale = np.maximum(frame1[i].scale + reduce(ds[nbrs], axis=0),
                           SCALE_CLAMP)
        mean_angles = _circular_mean(rel_euler[nbrs])
        rel_mean = ScipyRotation.from_euler("XYZ", mean_angles).as_matrix()
        rot = matrix_to_quat(rel_mean @ quat_to_matrix(frame1[i].rotation))
        out[i] = MotionUpdate(updates[i].gaussian_id, delta_mean, rot, scale,
                              Status.SOLVED)
    return out


def apply_updates(frame1, updates) -> list:
    """Materialize updated Gaussians; unsolved entries keep frame-1 values."""
    out = []
    for g, u in zip(frame1, updates):
        if u.status == Status.UNSOLVABLE:
            out.append(g)
        else:
            out.append(Gaussian3D(g.mean + u.delta_mean, u.new_rotation,
                                  u.new_scale, g.opacity))
    return out
