"""Per-view affine motion from weighted pixel tracks.

Each Gaussian's screen-space motion [A|b] is the weighted least-squares fit
of tracked pixel positions, accumulated incrementally as two running moment
matrices (3x3 and 3x2) so pixels can be processed independently and merged
in a deterministic order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import AffineMotion
from .errors import DimensionMismatch
from .splat import WeightMap

DET_FLOOR_DEFAULT = 1e-12
MIN_PIXELS_DEFAULT = 3
MIN_WEIGHT_DEFAULT = 1e-3
STATIC_THRESHOLD_PX_DEFAULT = 1.0


class Status(enum.Enum):
    SOLVED = "solved"
    UNSOLVABLE = "unsolvable"
    STATIC = "static"


@dataclass
class TrackField:
    """Dense per-view map from first-frame integer pixels to target positions."""

    view_id: int
    width: int
    height: int
    target: np.ndarray  # (H, W, 2) float64
    valid: np.ndarray   # (H, W) bool

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.target.shape != (self.height, self.width, 2):
            raise ValueError(f"target shape {self.target.shape} does not match "
                             f"{self.height}x{self.width}")
        if self.valid.shape != (self.height, self.width):
            raise ValueError("valid mask shape mismatch")
        if not np.all(np.isfinite(self.target[self.valid])):
            raise ValueError("valid track entries must be finite")

    @classmethod
    def identity(cls, view_id, width, height):
        ys, xs = np.mgrid[0:height, 0:width]
        return cls(view_id, width, height,
                   np.stack([xs, ys], axis=-1).astype(np.float64),
                   np.ones((height, width), dtype=bool))


@dataclass
class MotionAccumulator:
    """Running weighted moments of one Gaussian's pixels in one view."""

    v1: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    v2: np.ndarray = field(default_factory=lambda: np.zeros((3, 2)))
    weight_sum: float = 0.0
    pixel_count: int = 0
    static_pixel_count: int = 0
    static_weight_sum: float = 0.0


@dataclass
class ViewMotion:
    gaussian_id: int
    view_id: int
    motion: AffineMotion
    weight_sum: float
    pixel_count: int
    status: Status


def accumulate(acc: MotionAccumulator, x, x_prime, w,
               static_threshold_px=STATIC_THRESHOLD_PX_DEFAULT) -> MotionAccumulator:
    """Add one weighted pixel correspondence x -> x_prime to the accumulator."""
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    h = np.array([x[0], x[1], 1.0])
    acc.v1 += w * np.outer(h, h)
    acc.v2 += w * np.outer(h, x_prime)
    acc.weight_sum += w
    acc.pixel_count += 1
    if np.linalg.norm(x_prime - x) < static_threshold_px:
        acc.static_pixel_count += 1
        acc.static_weight_sum += w
    return acc


def solve_motion(acc: MotionAccumulator, det_floor=DET_FLOOR_DEFAULT,
                 min_pixels=MIN_PIXELS_DEFAULT, min_weight=MIN_WEIGHT_DEFAULT,
                 gaussian_id=-1, view_id=-1) -> ViewMotion:
    """Solve [A|b] from accumulated moments; degeneracy yields UNSOLVABLE."""
    if (acc.pixel_count < min_pixels or acc.weight_sum < min_weight
            or np.linalg.det(acc.v1) < det_floor):
        return ViewMotion(gaussian_id, view_id, AffineMotion.identity(),
                          acc.weight_sum, acc.pixel_count, Status.UNSOLVABLE)
    ab = np.linalg.solve(acc.v1, acc.v2)  # (3, 2): rows of [A|b]^T
    motion = AffineMotion(ab[:2, :].T, ab[2, :])
    return ViewMotion(gaussian_id, view_id, motion, acc.weight_sum,
                      acc.pixel_count, Status.SOLVED)


@dataclass
class ViewAccumulators:
    """Vectorized accumulators for every Gaussian in one view."""

    view_id: int
    v1: np.ndarray            # (G, 3, 3)
    v2: np.ndarray            # (G, 3, 2)
    weight_sum: np.ndarray    # (G,)
    pixel_count: np.ndarray   # (G,) int
    static_pixel_count: np.ndarray
    static_weight_sum: np.ndarray


def accumulate_view(weightmap: WeightMap, track: TrackField, n_gaussians: int,
                    static_threshold_px=STATIC_THRESHOLD_PX_DEFAULT) -> ViewAccumulators:
    """Feed every contribution with a valid track into per-Gaussian moments.

    np.add.at applies updates in array order, so the reduction is
    deterministic for a fixed contribution ordering.
    """
    if (weightmap.width, weightmap.height) != (track.width, track.height):
        raise DimensionMismatch(
            f"weight map {weightmap.width}x{weightmap.height} vs "
            f"track field {track.width}x{track.height}")
    g = n_gaussians
    acc = ViewAccumulators(weightmap.view_id, np.zeros((g, 3, 3)),
                           np.zeros((g, 3, 2)), np.zeros(g),
                           np.zeros(g, dtype=np.int64),
                           np.zeros(g, dtype=np.int64), np.zeros(g))
    if len(weightmap) == 0:
        return acc
    px, py = weightmap.pixel_x, weightmap.pixel_y
    ok = track.valid[py, px]
    if not np.any(ok):
        return acc
    gid = weightmap.gaussian_id[ok]
    x = np.stack([px[ok], py[ok]], axis=1).astype(np.float64)
    xp = track.target[py[ok], px[ok]]
    w = weightmap.alpha[ok] * weightmap.transmittance[ok]

    h = np.concatenate([x, np.ones((len(x), 1))], axis=1)  # (n, 3)
    np.add.at(acc.v1, gid, w[:, None, None] * h[:, :, None] * h[:, None, :])
    np.add.at(acc.v2, gid, w[:, None, None] * h[:, :, None] * xp[:, None, :])
    np.add.at(acc.weight_sum, gid, w)
    np.add.at(acc.pixel_count, gid, 1)
    static = np.linalg.norm(xp - x, axis=1) < static_threshold_px
    np.add.at(acc.static_pixel_count, gid[static], 1)
    np.add.at(acc.static_weight_sum, gid[static], w[static])
    return acc


def solve_view(acc: ViewAccumulators, det_floor=DET_FLOOR_DEFAULT,
               min_pixels=MIN_PIXELS_DEFAULT, min_weight=MIN_WEIGHT_DEFAULT):
    """Solve every Gaussian's motion in one view; returns a list of ViewMotion."""
    g = len(acc.weight_sum)
    det = np.linalg.det(acc.v1)
    solvable = ((acc.pixel_count >= min_pixels) & (acc.weight_sum >= min_weight)
                & (det >= det_floor))
    ab = np.zeros((g, 3, 2))
    if np.any(solvable):
        ab[solvable] = np.linalg.solve(acc.v1[solvable], acc.v2[solvable])
    out = []
    for i in range(g):
        if solvable[i]:
            motion = AffineMotion(ab[i, :2, :].T, ab[i, 2, :])
            status = Status.SOLVED
        else:
            motion = AffineMotion.identity()
            status = Status.UNSOLVABLE
        out.append(ViewMotion(i, acc.view_id, motion, float(acc.weight_sum[i]),
                              int(acc.pixel_count[i]), status))
    return out


def solve_all_views(weightmaps, tracks, n_gaussians,
                    det_floor=DET_FLOOR_DEFAULT, min_pixels=MIN_PIXELS_DEFAULT,
                    min_weight=MIN_WEIGHT_DEFAULT,
                    static_threshold_px=STATIC_THRESHOLD_PX_DEFAULT):
    """Accumulate and solve per-Gaussian motion in every view.

    Returns (motions, accumulators): motions[v][g] is a ViewMotion and
    accumulators[v] the per-view moment arrays (consumed later by static
    detection).
    """
    if len(weightmaps) != len(tracks):
        raise DimensionMismatch("weight maps and track fields count differ")
    motions, accs = [], []
    for wm, tf in zip(weightmaps, tracks):
        acc = accumulate_view(wm, tf, n_gaussians, static_threshold_px)
        accs.append(acc)
        motions.append(solve_view(acc, det_floor, min_pixels, min_weight))
    return motions, accs
