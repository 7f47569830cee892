"""Rigid-body poses and the pinhole camera model.

Conventions used across the whole package:

* World frame: +x forward, +y left, +z up, origin at the neck base.
* Camera frame: +z forward (optical axis), +x right, +y down.
* Quaternions are stored scalar-first (w, x, y, z), unit norm, and
  canonicalized so that w >= 0.  The two representations q and -q encode
  the same rotation; canonicalization makes equality checks meaningful.
* Flat pose serialization order is [px, py, pz, qw, qx, qy, qz] both on
  the wire and in episode files.

Everything here is double precision.  Consumers that need speed (the
point splatter) downcast at their own boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUAT_NORM_TOL = 1e-9


class GeometryError(ValueError):
    pass


class BehindCamera(GeometryError):
    """Raised when projecting a point with non-positive camera-frame z."""


class InvalidDepth(GeometryError):
    """Raised when unprojecting a pixel with non-positive depth."""


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first, w x y z)

def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise GeometryError("zero-norm quaternion")
    q = q / n
    # canonical sign: w >= 0
    if q[0] < 0.0:
        q = -q
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        if i == 0:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q = np.array(
                [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
            )
        elif i == 1:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q = np.array(
                [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
            )
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q = np.array(
                [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
            )
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise GeometryError("zero rotation axis")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis / n
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion q.  v may be (3,) or (N, 3)."""
    return np.asarray(v, dtype=np.float64) @ quat_to_matrix(q).T


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle of q in radians, in [0, pi].

    atan2 form rather than arccos(w): arccos loses all precision for tiny
    angles (quantized near 3e-8), which matters for 1e-9 pose comparisons."""
    s = float(np.linalg.norm(q[1:]))
    return 2.0 * np.arctan2(s, abs(float(q[0])))


def rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion."""
    w, xyz = q[0], q[1:]
    s = np.linalg.norm(xyz)
    if s < 1e-12:
        return 2.0 * xyz  # small-angle limit
    angle = 2.0 * np.arctan2(s, w)
    if angle > np.pi:
        angle -= 2.0 * np.pi
    return xyz / s * angle


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pose:
    """SE(3) transform: rotation then translation (x_out = R x + t)."""

    position: np.ndarray
    orientation: np.ndarray  # (w, x, y, z), unit, w >= 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > QUAT_NORM_TOL:
            if n == 0.0:
                raise GeometryError("zero-norm quaternion")
            q = q / n
        if q[0] < 0.0:
            q = -q
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_array(a: np.ndarray) -> "Pose":
        a = np.asarray(a, dtype=np.float64).reshape(7)
        return Pose(a[:3], a[3:])

    def to_array(self) -> np.ndarray:
        """Flatten to [px, py, pz, qw, qx, qy, qz]."""
        return np.concatenate([self.position, self.orientation])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def approx_equal(self, other: "Pose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        dq = quat_mul(quat_conjugate(self.orientation), other.orientation)
        return bool(
            np.linalg.norm(self.position - other.position) <= pos_tol
            and quat_angle(dq) <= rot_tol
        )

    def __repr__(self):
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(p=[{p}], q=[{q}])"


def compose(a: Pose, b: Pose) -> Pose:
    """a then b applied to local coordinates: result maps b-frame into a's parent."""
    return Pose(
        a.position + quat_rotate(a.orientation, b.position),
        quat_mul(a.orientation, b.orientation),
    )


def invert(p: Pose) -> Pose:
    qi = quat_conjugate(p.orientation)
    return Pose(-quat_rotate(qi, p.position), qi)


def transform_point(p: Pose, x: np.ndarray) -> np.ndarray:
    """Map point x from p's local frame into its parent frame."""
    return quat_rotate(p.orientation, x) + p.position


def transform_points(p: Pose, xs: np.ndarray) -> np.ndarray:
    """Vectorized transform_point for an (N, 3) array."""
    return np.asarray(xs, dtype=np.float64) @ quat_to_matrix(p.orientation).T + p.position


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics; no distortion."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}"
            )

    @staticmethod
    def default(width: int = 320, height: int = 240, focal: float | None = None) -> "Intrinsics":
        # 0.75*width gives a ~67 deg horizontal field of view
        f = float(focal) if focal is not None else 0.75 * width
        return Intrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def project(k: Intrinsics, x_cam: np.ndarray) -> tuple[float, float, float]:
    """Camera-frame point to (u, v, z).  Raises BehindCamera for z <= 0.

    The returned z is the camera-frame depth unchanged, so
    unproject(k, *project(k, x)) reconstructs x."""
    x, y, z = np.asarray(x_cam, dtype=np.float64)
    if z <= 0.0:
        raise BehindCamera(f"point has camera z={z}")
    return (k.fx * x / z + k.cx, k.fy * y / z + k.cy, z)


def unproject(k: Intrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """Pixel plus z-depth back to a camera-frame point.  Raises InvalidDepth for d <= 0."""
    if depth <= 0.0:
        raise InvalidDepth(f"depth={depth}")
    return np.array(
        [(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth], dtype=np.float64
    )
