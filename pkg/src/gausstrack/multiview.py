"""Fuse per-view affine motions into updated 3D Gaussian parameters.

The updated mean is triangulated from the moved 2D means (homogeneous DLT),
the updated 3D covariance is solved from the moved 2D covariances through
each view's 2x3 linearization, and the result is decomposed back into a
rotation and per-axis scales aligned with the first-frame axes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (DEPTH_CUTOFF, AffineMotion, CameraView, Gaussian2D,
                   Gaussian3D, Sym3, apply_affine, matrix_to_quat,
                   project_gaussian, projection_jacobian, quat_normalize,
                   quat_to_matrix)
from .errors import (DegenerateGeometry, InsufficientViews, NegativeEigenvalue,
                     PointBehindCamera, RankDeficient)
from .motion2d import Status, ViewMotion

MIN_VIEWS_DEFAULT = 2
MIN_TOTAL_WEIGHT_DEFAULT = 1e-3
MIN_TOTAL_PIXELS_DEFAULT = 3
EIG_FLOOR_DEFAULT = 1e-12
_SINGULAR_GAP_REL = 1e-9

# vech index pairs for a symmetric 3x3 in (xx, xy, xz, yy, yz, zz) order
_VECH_IJ = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


@dataclass(frozen=True)
class ViewObservation:
    """One view's updated 2D Gaussian and the linearization it came through."""

    view_id: int
    updated: Gaussian2D
    linearization: np.ndarray  # 2x3
    weight_sum: float


@dataclass
class MotionUpdate:
    gaussian_id: int
    delta_mean: np.ndarray
    new_rotation: np.ndarray  # quaternion
    new_scale: np.ndarray
    status: Status


def triangulate_mean(observations):
    """Homogeneous DLT triangulation of (CameraView, pixel mean) pairs."""
    if len(observations) < 2:
        raise InsufficientViews(f"need >= 2 views, got {len(observations)}")
    rows = []
    for view, mean2 in observations:
        p = view.projection_matrix()
        u, v = np.asarray(mean2, dtype=np.float64)
        rows.append(u * p[2] - p[0])
        rows.append(v * p[2] - p[1])
    a = np.stack(rows)
    _, s, vt = np.linalg.svd(a)
    if s[-2] - s[-1] <= _SINGULAR_GAP_REL * s[0]:
        raise DegenerateGeometry("two smallest singular values coincide")
    x = vt[-1]
    if abs(x[3]) <= _SINGULAR_GAP_REL * np.linalg.norm(x):
        raise DegenerateGeometry("solution at infinity")
    return x[:3] / x[3]


def solve_covariance3d(observations) -> Sym3:
    """Least-squares 3D covariance from per-view (M, cov2) constraints.

    Each view contributes the three unique entries of M S M^T as linear
    functions of the six unique entries of S.
    """
    if len(observations) < 2:
        raise InsufficientViews(f"need >= 2 views, got {len(observations)}")
    blocks, rhs = [], []
    for m, cov2 in observations:
        m = np.asarray(m, dtype=np.float64)
        cov2 = np.asarray(cov2, dtype=np.float64)
        l = np.empty((3, 6))
        for k, (i, j) in enumerate(_VECH_IJ):
            e = np.zeros((3, 3))
            e[i, j] = e[j, i] = 1.0
            mem = m @ e @ m.T
            l[:, k] = [mem[0, 0], mem[0, 1], mem[1, 1]]
        blocks.append(l)
        rhs.append([cov2[0, 0], 0.5 * (cov2[0, 1] + cov2[1, 0]), cov2[1, 1]])
    a = np.concatenate(blocks)
    b = np.concatenate(rhs)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[-1] < _SINGULAR_GAP_REL * s[0]:
        raise RankDeficient(f"stacked system rank deficient (sv ratio "
                            f"{s[-1] / s[0]:.3g})")
    x = vt.T @ ((u.T @ b) / s)
    return Sym3(*x)


def decompose_covariance(sigma, reference_rotation, reference_scale,
                         eig_floor=EIG_FLOOR_DEFAULT):
    """Split a 3D covariance into (rotation quaternion, scale) via eigen
    decomposition, with eigenpairs assigned to the reference axes.

    Eigenpairs are matched to the first-frame principal axes by the
    permutation maximizing the summed |dot| of eigenvectors with reference
    axes; signs are flipped for positive dots and det is forced to +1.
    Raises NegativeEigenvalue when an eigenvalue falls below
    eig_floor * |trace|.
    """
    m = sigma.matrix if isinstance(sigma, Sym3) else np.asarray(sigma, dtype=np.float64)
    m = 0.5 * (m + m.T)
    evals, evecs = np.linalg.eigh(m)
    floor = eig_floor * abs(np.trace(m))
    if np.any(evals < floor):
        raise NegativeEigenvalue(f"eigenvalues {evals} below floor {floor}")

    ref = quat_to_matrix(quat_normalize(reference_rotation))
    dots = np.abs(ref.T @ evecs)  # dots[axis k, eigenpair e]
    best_perm = max(itertools.permutations(range(3)),
                    key=lambda p: sum(dots[k, p[k]] for k in range(3)))
    r = np.empty((3, 3))
    scale = np.empty(3)
    for k in range(3):
        e = evecs[:, best_perm[k]]
        if np.dot(e, ref[:, k]) < 0:
            e = -e
        r[:, k] = e
        scale[k] = np.sqrt(evals[best_perm[k]])
    if np.linalg.det(r) < 0:
        r[:, 2] = -r[:, 2]
    return matrix_to_quat(r), scale


def _vech_linearization(m):
    """Rows of the linear map vech(S) -> (c_xx, c_xy, c_yy) for M S M^T.

    Vectorized over leading dimensions of m (..., 2, 3); returns (..., 3, 6)
    with columns in _VECH_IJ order.
    """
    m0, m1 = m[..., 0, :], m[..., 1, :]
    cols = []
    for i, j in _VECH_IJ:
        if i == j:
            cols.append(np.stack([m0[..., i] * m0[..., i],
                                  m0[..., i] * m1[..., i],
                                  m1[..., i] * m1[..., i]], axis=-1))
        else:
            cols.append(np.stack(
                [2.0 * m0[..., i] * m0[..., j],
                 m0[..., i] * m1[..., j] + m0[..., j] * m1[..., i],
                 2.0 * m1[..., i] * m1[..., j]], axis=-1))
    return np.stack(cols, axis=-1)


def _min_eig_ok(cov2):
    """Vectorized version of the 2x2 PSD tolerance used by Gaussian2D."""
    tr = cov2[..., 0, 0] + cov2[..., 1, 1]
    det = (cov2[..., 0, 0] * cov2[..., 1, 1]
           - cov2[..., 0, 1] * cov2[..., 1, 0])
    min_eig = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
    return min_eig >= -1e-9 * np.maximum(tr, 0.0)


def update_all(gaussians, motions, views, min_views=MIN_VIEWS_DEFAULT,
               min_total_weight=MIN_TOTAL_WEIGHT_DEFAULT,
               min_total_pixels=MIN_TOTAL_PIXELS_DEFAULT,
               eig_floor=EIG_FLOOR_DEFAULT):
    """Fuse per-view motions for every Gaussian at once.

    Same semantics as calling update_gaussian per Gaussian, but the per-view
    projections, moved 2D parameters, triangulation rows, and covariance
    linearization blocks are precomputed in batch; only the small per-
    Gaussian factorizations remain in the loop.
    """
    n = len(gaussians)
    n_views = len(views)
    means = np.array([g.mean for g in gaussians]).reshape(n, 3)
    rots = np.array([quat_to_matrix(g.rotation)
                     for g in gaussians]).reshape(n, 3, 3)
    scales = np.array([g.scale for g in gaussians]).reshape(n, 3)
    cov3 = rots * (scales ** 2)[:, None, :] @ np.transpose(rots, (0, 2, 1))

    solved = np.zeros((n_views, n), dtype=bool)
    weights = np.zeros((n_views, n))
    pixels = np.zeros((n_views, n), dtype=np.int64)
    ok = np.zeros((n_views, n), dtype=bool)     # projectable + PSD per view
    rows = np.zeros((n_views, n, 2, 4))         # triangulation row pairs
    lin = np.zeros((n_views, n, 3, 6))          # vech linearization blocks
    rhs = np.zeros((n_views, n, 3))             # moved cov2 unique entries

    for v, view in enumerate(views):
        vms = motions[v]
        solved[v] = [vm.status == Status.SOLVED for vm in vms]
        weights[v] = [vm.weight_sum for vm in vms]
        pixels[v] = [vm.pixel_count for vm in vms]
        a = np.array([vm.motion.a for vm in vms]).reshape(n, 2, 2)
        b = np.array([vm.motion.b for vm in vms]).reshape(n, 2)

        pc = means @ view.rotation.T + view.translation
        z = pc[:, 2]
        in_front = z > DEPTH_CUTOFF
        zs = np.where(in_front, z, 1.0)
        mean2 = np.stack([view.fx * pc[:, 0] / zs + view.cx,
                          view.fy * pc[:, 1] / zs + view.cy], axis=1)
        j = np.zeros((n, 2, 3))
        j[:, 0, 0] = view.fx / zs
        j[:, 1, 1] = view.fy / zs
        j[:, 0, 2] = -view.fx * pc[:, 0] / (zs * zs)
        j[:, 1, 2] = -view.fy * pc[:, 1] / (zs * zs)
        m = j @ view.rotation

        cov2 = m @ cov3 @ np.transpose(m, (0, 2, 1))
        cov2 = 0.5 * (cov2 + np.transpose(cov2, (0, 2, 1)))
        moved_mean = np.einsum("nij,nj->ni", a, mean2) + b
        moved_cov = a @ cov2 @ np.transpose(a, (0, 2, 1))
        moved_cov = 0.5 * (moved_cov + np.transpose(moved_cov, (0, 2, 1)))

        ok[v] = in_front & _min_eig_ok(cov2) & _min_eig_ok(moved_cov)
        p = view.projection_matrix()
        rows[v, :, 0] = moved_mean[:, 0, None] * p[2] - p[0]
        rows[v, :, 1] = moved_mean[:, 1, None] * p[2] - p[1]
        lin[v] = _vech_linearization(m)
        rhs[v] = np.stack([moved_cov[:, 0, 0],
                           0.5 * (moved_cov[:, 0, 1] + moved_cov[:, 1, 0]),
                           moved_cov[:, 1, 1]], axis=1)

    total_weight = np.where(solved, weights, 0.0).sum(axis=0)
    total_pixels = np.where(solved, pixels, 0).sum(axis=0)
    n_solved = solved.sum(axis=0)
    eligible = ((n_solved >= min_views) & (total_weight >= min_total_weight)
                & (total_pixels >= min_total_pixels)
                # a solved view that fails projection/PSD aborts the fuse
                & ~np.any(solved & ~ok, axis=0))

    updates = []
    for i in range(n):
        g = gaussians[i]
        unsolvable = MotionUpdate(i, np.zeros(3), g.rotation.copy(),
                                  g.scale.copy(), Status.UNSOLVABLE)
        if not eligible[i]:
            updates.append(unsolvable)
            continue
        sel = solved[:, i]
        try:
            a = rows[sel, i].reshape(-1, 4)
            _, s, vt = np.linalg.svd(a)
            if s[-2] - s[-1] <= _SINGULAR_GAP_REL * s[0]:
                raise DegenerateGeometry("two smallest singular values "
                                         "coincide")
            x = vt[-1]
            if abs(x[3]) <= _SINGULAR_GAP_REL * np.linalg.norm(x):
                raise DegenerateGeometry("solution at infinity")
            new_mean = x[:3] / x[3]

            u, s, vt = np.linalg.svd(lin[sel, i].reshape(-1, 6),
                                     full_matrices=False)
            if s[-1] < _SINGULAR_GAP_REL * s[0]:
                raise RankDeficient("stacked system rank deficient")
            sol = vt.T @ ((u.T @ rhs[sel, i].ravel()) / s)
            rotation, scale = decompose_covariance(Sym3(*sol), g.rotation,
                                                   g.scale, eig_floor)
        except (DegenerateGeometry, RankDeficient, NegativeEigenvalue,
                ValueError):
            updates.append(unsolvable)
            continue
        if not (np.all(np.isfinite(new_mean)) and np.all(scale > 0)):
            updates.append(unsolvable)
            continue
        updates.append(MotionUpdate(i, new_mean - g.mean, rotation, scale,
                                    Status.SOLVED))
    return updates


def update_gaussian(g: Gaussian3D, view_motions, views, gaussian_id=-1,
                    min_views=MIN_VIEWS_DEFAULT,
                    min_total_weight=MIN_TOTAL_WEIGHT_DEFAULT,
                    min_total_pixels=MIN_TOTAL_PIXELS_DEFAULT,
                    eig_floor=EIG_FLOOR_DEFAULT) -> MotionUpdate:
    """Fuse one Gaussian's solved per-view motions into a 3D update.

    Filters to solved views and applies the visibility/weight/pixel floors;
    any downstream failure (degenerate triangulation, rank-deficient
    covariance system, negative eigenvalue) yields an UNSOLVABLE update.
    """
    solved = [vm for vm in view_motions if vm.status == Status.SOLVED]
    unsolvable = MotionUpdate(gaussian_id, np.zeros(3), g.rotation.copy(),
                              g.scale.copy(), Status.UNSOLVABLE)
    if (len(solved) < min_views
            or sum(vm.weight_sum for vm in solved) < min_total_weight
            or sum(vm.pixel_count for vm in solved) < min_total_pixels):
        return unsolvable
    try:
        mean_obs, cov_obs = [], []
        for vm in solved:
            view = views[vm.view_id]
            g2, _ = project_gaussian(view, g)
            m = projection_jacobian(view, g.mean)
            moved = apply_affine(g2, vm.motion)
            mean_obs.append((view, moved.mean2))
            cov_obs.append((m, moved.cov2))
        new_mean = triangulate_mean(mean_obs)
        sigma = solve_covariance3d(cov_obs)
        rotation, scale = decompose_covariance(sigma, g.rotation, g.scale,
                                               eig_floor)
    except (PointBehindCamera, InsufficientViews, DegenerateGeometry,
            RankDeficient, NegativeEigenvalue, ValueError):
        return unsolvable
    if not (np.all(np.isfinite(new_mean)) and np.all(scale > 0)):
        return unsolvable
    return MotionUpdate(gaussian_id, new_mean - g.mean, rotation, scale,
                        Status.SOLVED)
