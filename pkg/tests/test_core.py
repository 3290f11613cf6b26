"""Unit tests for core geometry: quaternions, projections, affine pushes."""

import numpy as np
import pytest

from gausstrack.core import (AffineMotion, CameraView, Gaussian2D, Gaussian3D,
                             Sym3, apply_affine, covariance3d, matrix_to_quat,
                             project_gaussian, project_point,
                             projection_jacobian, quat_geodesic_angle,
                             quat_multiply, quat_normalize, quat_to_matrix)
from gausstrack.errors import PointBehindCamera

RNG = np.random.default_rng(42)


def random_quat(rng=RNG):
    return quat_normalize(rng.normal(size=4))


def random_camera(rng=RNG, width=100, height=80):
    q = random_quat(rng)
    return CameraView(quat_to_matrix(q), rng.normal(size=3), 120.0, 110.0,
                      width / 2, height / 2, width, height)


class TestQuaternions:
    def test_to_matrix_is_rotation(self):
        for _ in range(50):
            r = quat_to_matrix(random_quat())
            assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_matrix_round_trip(self):
        for _ in range(200):
            q = random_quat()
            q2 = matrix_to_quat(quat_to_matrix(q))
            # q and -q encode the same rotation
            assert min(np.abs(q - q2).max(), np.abs(q + q2).max()) < 1e-9

    def test_round_trip_near_pi_rotations(self):
        # trace close to -1 exercises the non-positive-trace branch
        for axis in (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                     np.array([0, 0, 1.0]),
                     quat_normalize(np.array([0.0, 1.0, 1.0, 1.0]))[1:]):
            axis = axis / np.linalg.norm(axis)
            q = np.concatenate([[np.cos(np.pi / 2 - 1e-8)],
                                np.sin(np.pi / 2 - 1e-8) * axis])
            r = quat_to_matrix(q)
            assert np.allclose(quat_to_matrix(matrix_to_quat(r)), r, atol=1e-7)

    def test_multiply_matches_matrix_product(self):
        for _ in range(50):
            q1, q2 = random_quat(), random_quat()
            left = quat_to_matrix(quat_multiply(q1, q2))
            right = quat_to_matrix(q1) @ quat_to_matrix(q2)
            assert np.allclose(left, right, atol=1e-12)

    def test_geodesic_angle(self):
        q = random_quat()
        assert quat_geodesic_angle(q, q) == pytest.approx(0.0, abs=1e-7)
        assert quat_geodesic_angle(q, -q) == pytest.approx(0.0, abs=1e-7)
        half = np.deg2rad(30) / 2
        rot = np.array([np.cos(half), np.sin(half), 0, 0])
        assert quat_geodesic_angle(quat_multiply(rot, q), q) == pytest.approx(
            np.deg2rad(30), abs=1e-9)

    def test_normalize_rejects_zero(self):
        with pytest.raises(ValueError):
            quat_normalize(np.zeros(4))
        with pytest.raises(ValueError):
            quat_normalize([np.nan, 0, 0, 0])


class TestDomainTypes:
    def test_gaussian_validation(self):
        with pytest.raises(ValueError):
            Gaussian3D([0, 0, 0], [1, 0, 0, 0], [1, -1, 1], 0.5)
        with pytest.raises(ValueError):
            Gaussian3D([0, 0, 0], [1, 0, 0, 0], [1, 1, 1], 0.0)
        with pytest.raises(ValueError):
            Gaussian3D([0, 0, 0], [1, 0, 0, 0], [1, 1, 1], 1.5)
        g = Gaussian3D([0, 0, 0], [2, 0, 0, 0], [1, 1, 1], 1.0)
        assert np.allclose(g.rotation, [1, 0, 0, 0])

    def test_camera_validation(self):
        with pytest.raises(ValueError):
            CameraView(np.eye(3) * 2, np.zeros(3), 1, 1, 0, 0, 10, 10)
        r = np.diag([1.0, -1.0, 1.0])  # det -1
        with pytest.raises(ValueError):
            CameraView(r, np.zeros(3), 1, 1, 0, 0, 10, 10)

    def test_projection_matrix(self):
        cam = random_camera()
        p = RNG.normal(size=3) + [0, 0, 20]
        pw = np.linalg.solve(cam.rotation, p - cam.translation)  # world point
        mean2, depth = project_point(cam, pw)
        hom = cam.projection_matrix() @ np.append(pw, 1.0)
        assert np.allclose(hom[:2] / hom[2], mean2, atol=1e-9)
        assert depth == pytest.approx(hom[2])

    def test_gaussian2d_psd_check(self):
        with pytest.raises(ValueError):
            Gaussian2D([0, 0], 1.0, 2.0, 1.0)  # det -3, indefinite
        g = Gaussian2D.from_cov([1, 2], np.array([[2.0, 0.5], [0.5, 1.0]]))
        assert np.allclose(g.cov2, [[2.0, 0.5], [0.5, 1.0]])

    def test_affine_identity_and_compose(self):
        m1 = AffineMotion(RNG.normal(size=(2, 2)), RNG.normal(size=2))
        m2 = AffineMotion(RNG.normal(size=(2, 2)), RNG.normal(size=2))
        x = RNG.normal(size=2)
        composed = m1.compose(m2)
        assert np.allclose(composed.a @ x + composed.b,
                           m1.a @ (m2.a @ x + m2.b) + m1.b, atol=1e-12)
        ident = AffineMotion.identity()
        assert np.allclose(ident.a @ x + ident.b, x)

    def test_sym3_round_trip(self):
        a = RNG.normal(size=(3, 3))
        s = Sym3.from_matrix(a + a.T)
        assert np.allclose(s.matrix, a + a.T, atol=1e-12)
        assert np.allclose(s.vech(), [s.xx, s.xy, s.xz, s.yy, s.yz, s.zz])


class TestOperations:
    def test_covariance3d(self):
        g = Gaussian3D(RNG.normal(size=3), random_quat(), [0.5, 1.0, 2.0], 0.9)
        r = g.rotation_matrix()
        expected = r @ np.diag(np.array([0.5, 1.0, 2.0]) ** 2) @ r.T
        assert np.allclose(covariance3d(g).matrix, expected, atol=1e-12)

    def test_behind_camera_raises(self):
        cam = CameraView(np.eye(3), np.zeros(3), 100, 100, 50, 40, 100, 80)
        with pytest.raises(PointBehindCamera):
            project_point(cam, [0, 0, -1.0])
        with pytest.raises(PointBehindCamera):
            projection_jacobian(cam, [0, 0, 0.0])

    def test_jacobian_matches_finite_differences(self):
        cam = random_camera()
        p = np.linalg.solve(cam.rotation,
                            np.array([0.3, -0.2, 25.0]) - cam.translation)
        j = projection_jacobian(cam, p)
        eps = 1e-6
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = eps
            hi, _ = project_point(cam, p + dp)
            lo, _ = project_point(cam, p - dp)
            assert np.allclose(j[:, k], (hi - lo) / (2 * eps), atol=1e-4)

    def test_project_gaussian_covariance(self):
        cam = random_camera()
        p = np.linalg.solve(cam.rotation,
                            np.array([0.0, 0.0, 30.0]) - cam.translation)
        g = Gaussian3D(p, random_quat(), [0.1, 0.2, 0.3], 0.8)
        g2, depth = project_gaussian(cam, g)
        m = projection_jacobian(cam, g.mean)
        expected = m @ covariance3d(g).matrix @ m.T
        assert np.allclose(g2.cov2, expected, atol=1e-12)
        assert depth > 0

    def test_apply_affine(self):
        g2 = Gaussian2D.from_cov([1.0, 2.0], np.array([[2.0, 0.3], [0.3, 1.0]]))
        motion = AffineMotion([[1.1, 0.2], [-0.1, 0.9]], [3.0, -1.0])
        out = apply_affine(g2, motion)
        assert np.allclose(out.mean2, motion.a @ g2.mean2 + motion.b)
        assert np.allclose(out.cov2, motion.a @ g2.cov2 @ motion.a.T, atol=1e-12)
