"""Quaternion and rigid-transform helpers.

Quaternions are numpy arrays ordered (w, x, y, z) and are kept unit-norm.
Rotation vectors ("logs") are axis * angle in radians, world frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_mul(a, b):
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


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    """Rotate 3-vector v by unit quaternion q."""
    w = q[0]
    u = q[1:]
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R):
    """Rotation matrix to unit quaternion (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_log(q):
    """Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi]."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    nv = np.linalg.norm(q[1:])
    if nv < 1e-12:
        # first-order expansion around identity
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(nv, q[0])
    return q[1:] * (angle / nv)


def quat_angle(a, b):
    """Relative rotation angle between two unit quaternions, radians."""
    return np.linalg.norm(quat_log(quat_mul(a, quat_conj(b))))


def orientation_error(q_target, q_current):
    """World-frame rotation vector taking q_current onto q_target."""
    return quat_log(quat_mul(q_target, quat_conj(q_current)))


def slerp(q0, q1, t):
    """Spherical interpolation from q0 to q1.

    Falls back to normalized linear interpolation when the inter-quaternion
    angle is below 1e-6 rad (the sin denominators vanish there).
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    dot = float(np.clip(np.dot(q0, q1), -1.0, 1.0))
    theta = np.arccos(np.clip(abs(dot), -1.0, 1.0)) * 2.0
    if theta < 1e-6:
        return quat_normalize((1.0 - t) * q0 + t * q1)
    half = np.arccos(dot)
    s = np.sin(half)
    return quat_normalize(
        (np.sin((1.0 - t) * half) / s) * q0 + (np.sin(t * half) / s) * q1
    )


def rpy_to_matrix(roll, pitch, yaw):
    """Fixed-axis XYZ convention: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def rpy_to_quat(roll, pitch, yaw):
    return matrix_to_quat(rpy_to_matrix(roll, pitch, yaw))


@dataclass(frozen=True)
class Pose:
    """SE(3) element: position in meters plus unit quaternion (w, x, y, z)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: QUAT_IDENTITY.copy())

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        q = np.asarray(self.quaternion, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} too far from 1")
        if abs(n - 1.0) > 1e-9:
            q = q / n
        object.__setattr__(self, "quaternion", q)

    @staticmethod
    def identity():
        return Pose(np.zeros(3), QUAT_IDENTITY.copy())

    def rotation_matrix(self):
        return quat_to_matrix(self.quaternion)

    def transform_point(self, p):
        return self.position + quat_rotate(self.quaternion, np.asarray(p, dtype=float))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.transform_point(other.position),
            quat_mul(self.quaternion, other.quaternion),
        )

    def inverse(self) -> "Pose":
        qinv = quat_conj(self.quaternion)
        return Pose(quat_rotate(qinv, -self.position), qinv)
