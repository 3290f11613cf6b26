"""Core geometry: 3D Gaussians, pinhole cameras, and their 2D projections.

Conventions:
  - Quaternions are (w, x, y, z), normalized on construction.
  - CameraView stores the world-to-camera rigid transform: p_cam = R @ p + t.
  - Pixel coordinates: u = fx * x/z + cx, v = fy * y/z + cy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PointBehindCamera

DEPTH_CUTOFF = 1e-6


# ---------------------------------------------------------------------------
# quaternion helpers

def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero/non-finite quaternion")
    return q / n


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m):
    """Unit quaternion (w, x, y, z) of a rotation matrix, w >= 0."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_multiply(q1, q2):
    """Composition q1 * q2 (apply q2 first)."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_geodesic_angle(q1, q2):
    """Angle in radians between two rotations (sign-insensitive)."""
    d = abs(float(np.dot(quat_normalize(q1), quat_normalize(q2))))
    return 2.0 * np.arccos(min(d, 1.0))


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Gaussian3D:
    """One ellipsoid primitive: position, orientation, per-axis extent, opacity."""

    mean: np.ndarray
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    scale: np.ndarray
    opacity: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        rotation = quat_normalize(np.asarray(self.rotation, dtype=np.float64).reshape(4))
        scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        if not np.all(scale > 0):
            raise ValueError(f"scale must be strictly positive, got {scale}")
        if not (0.0 < self.opacity <= 1.0):
            raise ValueError(f"opacity must be in (0, 1], got {self.opacity}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "opacity", float(self.opacity))

    def rotation_matrix(self):
        return quat_to_matrix(self.rotation)


@dataclass(frozen=True)
class CameraView:
    """Pinhole camera with a rigid world-to-camera transform."""

    rotation: np.ndarray     # 3x3, world -> camera
    translation: np.ndarray  # 3
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("camera rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("camera rotation must have det +1")
        if self.fx <= 0 or self.fy <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("fx, fy, width, height must be strictly positive")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def to_camera(self, p):
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.translation

    def intrinsic_matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def projection_matrix(self):
        """3x4 pinhole projection K @ [R | t]."""
        return self.intrinsic_matrix() @ np.hstack(
            [self.rotation, self.translation.reshape(3, 1)])


@dataclass(frozen=True)
class Gaussian2D:
    """Projected Gaussian on an image plane; covariance stored as 3 unique entries."""

    mean2: np.ndarray
    cov_xx: float
    cov_xy: float
    cov_yy: float

    def __post_init__(self):
        mean2 = np.asarray(self.mean2, dtype=np.float64).reshape(2)
        tr = self.cov_xx + self.cov_yy
        det = self.cov_xx * self.cov_yy - self.cov_xy * self.cov_xy
        # both eigenvalues >= -1e-9 * trace
        min_eig = 0.5 * (tr - np.sqrt(max(tr * tr - 4 * det, 0.0)))
        if min_eig < -1e-9 * max(tr, 0.0):
            raise ValueError("cov2 is not positive semi-definite")
        object.__setattr__(self, "mean2", mean2)

    @classmethod
    def from_cov(cls, mean2, cov2):
        cov2 = np.asarray(cov2, dtype=np.float64)
        xy = 0.5 * (cov2[0, 1] + cov2[1, 0])
        return cls(mean2, float(cov2[0, 0]), xy, float(cov2[1, 1]))

    @property
    def cov2(self):
        return np.array([[self.cov_xx, self.cov_xy],
                         [self.cov_xy, self.cov_yy]])


@dataclass(frozen=True)
class AffineMotion:
    """2D affine map x -> A x + b."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64).reshape(2, 2)
        b = np.asarray(self.b, dtype=np.float64).reshape(2)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("affine motion entries must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls):
        return cls(np.eye(2), np.zeros(2))

    def compose(self, inner: "AffineMotion") -> "AffineMotion":
        """self after inner: x -> self(inner(x))."""
        return AffineMotion(self.a @ inner.a, self.a @ inner.b + self.b)


@dataclass(frozen=True)
class Sym3:
    """Symmetric 3x3 matrix stored as its six unique entries."""

    xx: float
    xy: float
    xz: float
    yy: float
    yz: float
    zz: float

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]),
                   0.5 * float(m[0, 2] + m[2, 0]), float(m[1, 1]),
                   0.5 * float(m[1, 2] + m[2, 1]), float(m[2, 2]))

    @property
    def matrix(self):
        return np.array([[self.xx, self.xy, self.xz],
                         [self.xy, self.yy, self.yz],
                         [self.xz, self.yz, self.zz]])

    def vech(self):
        """Unique entries in (xx, xy, xz, yy, yz, zz) order."""
        return np.array([self.xx, self.xy, self.xz, self.yy, self.yz, self.zz])


# ---------------------------------------------------------------------------
# operations

def covariance3d(g: Gaussian3D) -> Sym3:
    """World-space covariance R diag(s^2) R^T of one Gaussian."""
    r = g.rotation_matrix()
    m = (r * (g.scale ** 2)) @ r.T
    return Sym3.from_matrix(0.5 * (m + m.T))


def project_point(view: CameraView, p):
    """Pinhole projection of a world point; returns (pixel mean, depth)."""
    pc = view.to_camera(p)
    z = pc[2]
    if z <= DEPTH_CUTOFF:
        raise PointBehindCamera(f"camera-space depth {z} <= {DEPTH_CUTOFF}")
    mean2 = np.array([view.fx * pc[0] / z + view.cx,
                      view.fy * pc[1] / z + view.cy])
    return mean2, float(z)


def projection_jacobian(view: CameraView, p):
    """Full 2x3 linearization of project_point w.r.t. the world point.

    This is the pinhole Jacobian at the camera-space point composed with the
    world-to-camera rotation, so cov2 = M cov3 M^T directly.
    """
    pc = view.to_camera(p)
    z = pc[2]
    if z <= DEPTH_CUTOFF:
        raise PointBehindCamera(f"camera-space depth {z} <= {DEPTH_CUTOFF}")
    j = np.array([[view.fx / z, 0.0, -view.fx * pc[0] / (z * z)],
                  [0.0, view.fy / z, -view.fy * pc[1] / (z * z)]])
    return j @ view.rotation


def project_gaussian(view: CameraView, g: Gaussian3D):
    """Project a 3D Gaussian to the image plane; returns (Gaussian2D, depth)."""
    mean2, depth = project_point(view, g.mean)
    m = projection_jacobian(view, g.mean)
    cov2 = m @ covariance3d(g).matrix @ m.T
    cov2 = 0.5 * (cov2 + cov2.T)
    return Gaussian2D.from_cov(mean2, cov2), depth


def apply_affine(g2: Gaussian2D, motion: AffineMotion) -> Gaussian2D:
    """Push a 2D Gaussian through an affine map: mean -> A m + b, cov -> A C A^T."""
    mean2 = motion.a @ g2.mean2 + motion.b
    cov2 = motion.a @ g2.cov2 @ motion.a.T
    cov2 = 0.5 * (cov2 + cov2.T)
    return Gaussian2D.from_cov(mean2, cov2)
