"""Rigid transforms and pinhole camera geometry."""

import numpy as np

_ORTHO_TOL = 1e-9


class RigidTransform:
    """A proper rigid motion in 3D: ``p -> R @ p + t``.

    ``rotation`` is a 3x3 orthonormal matrix with det +1, ``translation`` a
    3-vector in meters.  Instances are immutable.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation, translation):
        R = np.array(rotation, dtype=float)
        t = np.array(translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ValueError("rotation must have determinant +1")
        R.flags.writeable = False
        t.flags.writeable = False
        self.rotation = R
        self.translation = t

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rotation_about(cls, rotation, center):
        """Rotation about an arbitrary point instead of the origin."""
        R = np.asarray(rotation, dtype=float)
        c = np.asarray(center, dtype=float)
        return cls(R, c - R @ c)

    def apply(self, points):
        """Transform one point (3,) or a stack of points (n, 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other):
        """Return the transform equivalent to applying ``other`` first, then ``self``."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self):
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def is_identity(self, tol=1e-12):
        return (np.allclose(self.rotation, np.eye(3), atol=tol)
                and np.allclose(self.translation, 0.0, atol=tol))

    def __repr__(self):
        return f"RigidTransform(t={self.translation.round(4).tolist()})"


def rot_z(angle):
    """Rotation matrix for a yaw of ``angle`` radians about +z."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_angle(R):
    """Angle in radians of the rotation ``R`` (geodesic distance from identity).

    Uses atan2 of the skew and trace parts, which stays accurate for angles
    near zero where arccos of the trace loses half the available precision.
    """
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(skew) / 2.0
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arctan2(s, c))


def random_rotation(rng, max_angle=np.pi):
    """Uniform random axis, angle uniform in [0, max_angle]."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


class CameraModel:
    """Pinhole camera: intrinsics in pixels plus a world-to-camera extrinsic.

    The camera frame is +z forward, +x right, +y down; pixel (u, v) covers the
    unit square [u, u+1) x [v, v+1) with its ray through the square's center.
    """

    __slots__ = ("fx", "fy", "cx", "cy", "extrinsics", "width", "height")

    def __init__(self, fx, fy, cx, cy, extrinsics, width, height):
        if fx <= 0 or fy <= 0:
            raise ValueError("focal lengths must be positive")
        if width < 1 or height < 1:
            raise ValueError("image dimensions must be positive")
        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)
        self.extrinsics = extrinsics
        self.width = int(width)
        self.height = int(height)

    @classmethod
    def look_at(cls, position, target, width, height, fov_deg=60.0):
        """Camera at ``position`` looking toward ``target``, +z world treated as up."""
        position = np.asarray(position, dtype=float)
        forward = np.asarray(target, dtype=float) - position
        forward /= np.linalg.norm(forward)
        up = np.array([0.0, 0.0, 1.0])
        if abs(forward @ up) > 0.999:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R_c2w = np.column_stack([right, down, forward])
        world_to_cam = RigidTransform(R_c2w.T, -R_c2w.T @ position)
        f = (width / 2.0) / np.tan(np.radians(fov_deg) / 2.0)
        return cls(f, f, width / 2.0, height / 2.0, world_to_cam, width, height)

    @property
    def center_world(self):
        """Camera origin expressed in the world frame."""
        ext = self.extrinsics
        return -ext.rotation.T @ ext.translation

    def pixel_rays(self):
        """Unit ray directions in world frame, shape (height, width, 3)."""
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        dirs = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        return dirs @ self.extrinsics.rotation  # row-vector form of R^T @ d

    def project_points(self, points):
        """Project world points to continuous pixel coords.

        Returns (u, v, rng, in_front): pixel coordinates, Euclidean distance
        from the camera center, and whether each point lies in front of the
        camera.  Pixel index is floor(u), floor(v).
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        pc = self.extrinsics.apply(p)
        z = pc[:, 2]
        in_front = z > 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[:, 0] / z + self.cx
            v = self.fy * pc[:, 1] / z + self.cy
        dist = np.linalg.norm(p - self.center_world, axis=1)
        return u, v, dist, in_front

    def backproject(self, us, vs, ranges):
        """World points at Euclidean distance ``ranges`` along the rays of pixels (us, vs)."""
        du = (np.asarray(us, dtype=float) + 0.5 - self.cx) / self.fx
        dv = (np.asarray(vs, dtype=float) + 0.5 - self.cy) / self.fy
        d = np.stack([du, dv, np.ones_like(du)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        d_world = d @ self.extrinsics.rotation
        return self.center_world + d_world * np.asarray(ranges, dtype=float)[..., None]
