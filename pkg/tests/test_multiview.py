"""Unit tests for triangulation, covariance solving, and Gaussian updates."""

import numpy as np
import pytest

from gausstrack.core import (AffineMotion, CameraView, Gaussian3D,
                             Sym3, covariance3d, project_point,
                             projection_jacobian, quat_geodesic_angle,
                             quat_normalize, quat_to_matrix)
from gausstrack.errors import (DegenerateGeometry, InsufficientViews,
                               NegativeEigenvalue, RankDeficient)
from gausstrack.motion2d import Status, ViewMotion
from gausstrack.multiview import (decompose_covariance, solve_covariance3d,
                                  triangulate_mean, update_gaussian)

RNG = np.random.default_rng(23)


def ring_cameras(n=4, radius=5.0, focal=100.0, width=200, height=160):
    cams = []
    for v in range(n):
        a = 2 * np.pi * v / n
        pos = np.array([radius * np.cos(a), radius * np.sin(a), 1.0])
        forward = -pos / np.linalg.norm(pos)
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        r = np.stack([right, down, forward])
        cams.append(CameraView(r, -r @ pos, focal, focal,
                               width / 2, height / 2, width, height))
    return cams


class TestTriangulation:
    def test_exact_round_trip(self):
        cams = ring_cameras()
        for _ in range(50):
            p = RNG.uniform(-1, 1, size=3)
            obs = [(c, project_point(c, p)[0]) for c in cams]
            assert np.allclose(triangulate_mean(obs), p, atol=1e-9)

    def test_two_views_suffice(self):
        cams = ring_cameras()[:2]
        p = np.array([0.1, -0.2, 0.3])
        obs = [(c, project_point(c, p)[0]) for c in cams]
        assert np.allclose(triangulate_mean(obs), p, atol=1e-9)

    def test_insufficient_views(self):
        cams = ring_cameras()
        with pytest.raises(InsufficientViews):
            triangulate_mean([(cams[0], np.array([10.0, 10.0]))])

    def test_identical_views_degenerate(self):
        cam = ring_cameras()[0]
        m = project_point(cam, np.zeros(3))[0]
        with pytest.raises(DegenerateGeometry):
            triangulate_mean([(cam, m), (cam, m)])


class TestCovarianceSolve:
    def test_round_trip(self):
        cams = ring_cameras()
        p = np.array([0.2, 0.1, -0.1])
        for _ in range(20):
            a = RNG.normal(size=(3, 3))
            sigma = a @ a.T + 0.1 * np.eye(3)
            obs = []
            for c in cams:
                m = projection_jacobian(c, p)
                obs.append((m, m @ sigma @ m.T))
            rec = solve_covariance3d(obs).matrix
            assert np.linalg.norm(rec - sigma) < 1e-9 * np.linalg.norm(sigma)

    def test_insufficient_views(self):
        with pytest.raises(InsufficientViews):
            solve_covariance3d([(np.eye(2, 3), np.eye(2))])

    def test_rank_deficient_same_view(self):
        cam = ring_cameras()[0]
        p = np.zeros(3)
        m = projection_jacobian(cam, p)
        cov2 = m @ np.eye(3) @ m.T
        # one view repeated: 6 unknowns, rank <= 3 within numerical noise
        with pytest.raises(RankDeficient):
            solve_covariance3d([(m, cov2), (m, cov2)])


class TestDecompose:
    def test_round_trip_matches_reference_axes(self):
        for _ in range(50):
            q = quat_normalize(RNG.normal(size=4))
            scale = np.sort(RNG.uniform(0.1, 2.0, size=3))[::-1]
            scale *= [1.0, 0.8, 0.5]  # make scales clearly distinct
            r = quat_to_matrix(q)
            sigma = r @ np.diag(scale ** 2) @ r.T
            q2, s2 = decompose_covariance(Sym3.from_matrix(sigma), q, scale)
            assert np.allclose(s2, scale, atol=1e-9)
            assert quat_geodesic_angle(q, q2) < 1e-7

    def test_perturbed_reference_still_matches(self):
        # reference within a few degrees of the true axes resolves the
        # eigenvector permutation/sign ambiguity
        q = quat_normalize([0.9, 0.1, 0.2, 0.1])
        scale = np.array([1.5, 0.7, 0.3])
        r = quat_to_matrix(q)
        sigma = r @ np.diag(scale ** 2) @ r.T
        half = np.deg2rad(3.0) / 2
        nudge = np.array([np.cos(half), np.sin(half), 0.0, 0.0])
        from gausstrack.core import quat_multiply
        q_ref = quat_multiply(nudge, q)
        q2, s2 = decompose_covariance(sigma, q_ref, scale)
        assert np.allclose(s2, scale, atol=1e-9)
        assert quat_geodesic_angle(q, q2) < 1e-7

    def test_rotation_has_det_one(self):
        for _ in range(20):
            q = quat_normalize(RNG.normal(size=4))
            scale = RNG.uniform(0.2, 1.0, size=3)
            r = quat_to_matrix(q)
            sigma = r @ np.diag(scale ** 2) @ r.T
            q2, _ = decompose_covariance(sigma, RNG.normal(size=4), scale)
            assert np.linalg.det(quat_to_matrix(q2)) == pytest.approx(1.0)

    def test_negative_eigenvalue_raises(self):
        sigma = np.diag([1.0, 1.0, -0.5])
        with pytest.raises(NegativeEigenvalue):
            decompose_covariance(sigma, [1, 0, 0, 0], [1, 1, 1])


def exact_view_motions(g, g_new, cams, weight=1.0, pixels=100):
    """Per-view affine motions consistent with a rigid update of g."""
    motions = []
    for v, cam in enumerate(cams):
        m2_old, _ = project_point(cam, g.mean)
        m2_new, _ = project_point(cam, g_new.mean)
        j_old = projection_jacobian(cam, g.mean)
        j_new = projection_jacobian(cam, g_new.mean)
        # affine map taking the old 2D Gaussian to the new one: align the
        # projected covariances via a = L_new L_old^-1 in Cholesky factors
        c_old = j_old @ covariance3d(g).matrix @ j_old.T
        c_new = j_new @ covariance3d(g_new).matrix @ j_new.T
        l_old = np.linalg.cholesky(c_old)
        l_new = np.linalg.cholesky(c_new)
        a = l_new @ np.linalg.inv(l_old)
        b = m2_new - a @ m2_old
        motions.append(ViewMotion(0, v, AffineMotion(a, b), weight, pixels,
                                  Status.SOLVED))
    return motions


class TestUpdateGaussian:
    def test_translation_recovered(self):
        cams = ring_cameras()
        g = Gaussian3D([0.1, 0.0, 0.2], [1, 0, 0, 0], [0.2, 0.15, 0.1], 0.9)
        delta = np.array([0.05, -0.03, 0.02])
        g_new = Gaussian3D(g.mean + delta, g.rotation, g.scale, g.opacity)
        update = update_gaussian(g, exact_view_motions(g, g_new, cams), cams)
        assert update.status == Status.SOLVED
        assert np.allclose(update.delta_mean, delta, atol=1e-7)
        # covariance fusion linearizes at the frame-1 mean, so recovered
        # scales carry an error of order |delta| / depth
        assert np.allclose(update.new_scale, g.scale, rtol=0.05)

    def test_insufficient_solved_views(self):
        cams = ring_cameras()
        g = Gaussian3D([0, 0, 0], [1, 0, 0, 0], [0.2] * 3, 0.9)
        motions = [ViewMotion(0, v, AffineMotion.identity(), 1.0, 100,
                              Status.UNSOLVABLE) for v in range(len(cams))]
        assert update_gaussian(g, motions, cams).status == Status.UNSOLVABLE

    def test_low_weight_unsolvable(self):
        cams = ring_cameras()
        g = Gaussian3D([0, 0, 0], [1, 0, 0, 0], [0.2] * 3, 0.9)
        motions = exact_view_motions(g, g, cams, weight=1e-6)
        assert update_gaussian(g, motions, cams).status == Status.UNSOLVABLE

    def test_low_pixel_count_unsolvable(self):
        cams = ring_cameras()
        g = Gaussian3D([0, 0, 0], [1, 0, 0, 0], [0.2] * 3, 0.9)
        motions = exact_view_motions(g, g, cams, pixels=0)
        assert update_gaussian(g, motions, cams).status == Status.UNSOLVABLE

    def test_unsolvable_keeps_frame1_parameters(self):
        cams = ring_cameras()
        g = Gaussian3D([0, 0, 0], [1, 0, 0, 0], [0.2] * 3, 0.9)
        update = update_gaussian(g, [], cams)
        assert update.status == Status.UNSOLVABLE
        assert np.allclose(update.delta_mean, 0.0)
        assert np.allclose(update.new_rotation, g.rotation)
        assert np.allclose(update.new_scale, g.scale)


class TestUpdateAll:
    def test_matches_scalar_update(self):
        from gausstrack.motion2d import accumulate_view, solve_view
        from gausstrack.multiview import update_all
        from gausstrack.scene import generate_scene, oracle_track
        from gausstrack.splat import rasterize_weights

        scene = generate_scene(21, 120, 4, 2, mover_fraction=0.25,
                               translate_mag=0.02)
        frame1 = scene.frames[0]
        weightmaps = [rasterize_weights(cam, frame1, view_id=v)
                      for v, cam in enumerate(scene.cameras)]
        tracks = [oracle_track(scene, v, 1) for v in range(4)]
        accs = [accumulate_view(wm, tf, len(frame1))
                for wm, tf in zip(weightmaps, tracks)]
        motions = [solve_view(acc) for acc in accs]

        batched = update_all(frame1, motions, scene.cameras)
        assert len(batched) == len(frame1)
        n_solved = 0
        for i, g in enumerate(frame1):
            per_view = [motions[v][i] for v in range(4)]
            scalar = update_gaussian(g, per_view, scene.cameras, gaussian_id=i)
            assert batched[i].status == scalar.status
            assert batched[i].gaussian_id == i
            if scalar.status == Status.SOLVED:
                n_solved += 1
                np.testing.assert_allclose(batched[i].delta_mean,
                                           scalar.delta_mean, atol=1e-9)
                assert quat_geodesic_angle(batched[i].new_rotation,
                                           scalar.new_rotation) < 1e-7
                np.testing.assert_allclose(batched[i].new_scale,
                                           scalar.new_scale, rtol=1e-9)
            else:
                assert np.array_equal(batched[i].delta_mean, np.zeros(3))
                assert np.array_equal(batched[i].new_rotation, g.rotation)
                assert np.array_equal(batched[i].new_scale, g.scale)
        assert n_solved > 0
