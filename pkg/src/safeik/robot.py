"""Serial-chain manipulator model: config parsing, forward kinematics,
geometric Jacobians, and world-frame placement of link collision capsules.

Frame convention: joint i contributes ``parent_offset_i * motion_i``; link
frame i is the chain product through joint i, and the end effector is the
last link frame composed with ``ee_offset``. All quantities are world frame
unless noted, units meters/radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import yaml

from .collision import Capsule
from .se3 import Pose, matrix_to_quat, quat_to_matrix, rpy_to_matrix

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


class RobotConfigError(ValueError):
    """Raised on malformed robot documents; carries the offending field path."""

    def __init__(self, fieldpath, message):
        self.fieldpath = fieldpath
        super().__init__(f"{fieldpath}: {message}")


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str
    axis: np.ndarray           # unit 3-vector in the joint frame
    offset_position: np.ndarray
    offset_quaternion: np.ndarray
    limit_lower: float
    limit_upper: float

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float).reshape(3))
        object.__setattr__(
            self, "offset_position", np.asarray(self.offset_position, dtype=float).reshape(3)
        )
        object.__setattr__(
            self, "offset_quaternion", np.asarray(self.offset_quaternion, dtype=float).reshape(4)
        )
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise RobotConfigError(f"joint '{self.name}'.kind", f"unknown kind {self.kind!r}")
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise RobotConfigError(f"joint '{self.name}'.axis", "axis must have unit norm")
        if abs(np.linalg.norm(self.offset_quaternion) - 1.0) > 1e-9:
            raise RobotConfigError(f"joint '{self.name}'.origin", "offset quaternion not unit")
        if self.limit_lower > self.limit_upper:
            raise RobotConfigError(
                f"joint '{self.name}'.limits", "lower limit exceeds upper limit"
            )


@dataclass(frozen=True)
class LinkCollider:
    link_index: int
    p0: np.ndarray  # segment endpoints in the link frame
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(3))
        if self.radius <= 0.0:
            raise RobotConfigError(
                f"collider(link={self.link_index}).radius", "nonpositive collider radius"
            )


@dataclass(frozen=True)
class RobotModel:
    """Immutable kinematic description; safe to share across threads."""

    joints: tuple
    base_position: np.ndarray
    base_quaternion: np.ndarray
    ee_offset_position: np.ndarray
    ee_offset_quaternion: np.ndarray
    colliders: tuple
    name: str = "robot"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "colliders", tuple(self.colliders))
        for key in ("base_position", "ee_offset_position"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float).reshape(3))
        for key in ("base_quaternion", "ee_offset_quaternion"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float).reshape(4))
        if len(self.joints) < 1:
            raise RobotConfigError("joints", "chain needs at least one joint")
        for c in self.colliders:
            if not 0 <= c.link_index < len(self.joints):
                raise RobotConfigError(
                    f"collider(link={c.link_index}).link", "collider references missing link"
                )

    @property
    def n(self):
        return len(self.joints)

    @cached_property
    def limits_lower(self):
        return np.array([j.limit_lower for j in self.joints])

    @cached_property
    def limits_upper(self):
        return np.array([j.limit_upper for j in self.joints])

    @cached_property
    def _offset_rotations(self):
        return np.stack([quat_to_matrix(j.offset_quaternion) for j in self.joints])

    @cached_property
    def self_collision_pairs(self):
        """Collider index pairs on non-adjacent links (|link_i - link_j| >= 2)."""
        pairs = []
        for i in range(len(self.colliders)):
            for j in range(i + 1, len(self.colliders)):
                if abs(self.colliders[i].link_index - self.colliders[j].link_index) >= 2:
                    pairs.append((i, j))
        return tuple(pairs)

    @cached_property
    def collider_arrays(self):
        """(link indices, local p0, local p1, radii) as flat arrays."""
        links = np.array([c.link_index for c in self.colliders], dtype=int)
        p0 = np.stack([c.p0 for c in self.colliders]) if self.colliders else np.zeros((0, 3))
        p1 = np.stack([c.p1 for c in self.colliders]) if self.colliders else np.zeros((0, 3))
        radii = np.array([c.radius for c in self.colliders])
        return links, p0, p1, radii

    @cached_property
    def self_collision_pair_arrays(self):
        pairs = np.array(self.self_collision_pairs, dtype=int).reshape(-1, 2)
        return pairs[:, 0], pairs[:, 1]

    @cached_property
    def revolute_mask(self):
        return np.array([j.kind == REVOLUTE for j in self.joints])


def _cross(a, b):
    # np.cross with its axis bookkeeping dominates profile traces at these
    # sizes; the expansion is ~3x faster
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _axis_angle_matrix(axis, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    x, y, z = axis
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


class Kinematics:
    """Forward-kinematics evaluation at one configuration, with cached frames.

    Exposes everything the IK objective/constraint terms need so a single FK
    pass per optimizer evaluation is shared by all of them.
    """

    def __init__(self, model: RobotModel, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (model.n,):
            raise ValueError(f"expected q of length {model.n}, got shape {q.shape}")
        self.model = model
        self.q = q

        n = model.n
        R = quat_to_matrix(model.base_quaternion)
        p = model.base_position.copy()
        self.link_R = np.empty((n, 3, 3))
        self.link_p = np.empty((n, 3))
        self.axis_world = np.empty((n, 3))
        self.axis_point = np.empty((n, 3))  # a world point on each joint axis

        off_R = model._offset_rotations
        for i, joint in enumerate(model.joints):
            p = p + R @ joint.offset_position
            R = R @ off_R[i]
            z = R @ joint.axis
            self.axis_world[i] = z
            self.axis_point[i] = p
            if joint.kind == REVOLUTE:
                R = R @ _axis_angle_matrix(joint.axis, q[i])
            else:
                p = p + z * q[i]
            self.link_R[i] = R
            self.link_p[i] = p

        self.ee_position = p + R @ model.ee_offset_position
        self.ee_R = R @ quat_to_matrix(model.ee_offset_quaternion)

    @cached_property
    def ee_pose(self) -> Pose:
        return Pose(self.ee_position, matrix_to_quat(self.ee_R))

    @cached_property
    def jacobian(self):
        """6 x n geometric Jacobian of the end effector (linear rows first)."""
        rev = self.model.revolute_mask[:, None]
        lever = self.ee_position[None, :] - self.axis_point
        lin = np.where(rev, _cross(self.axis_world, lever), self.axis_world)
        ang = np.where(rev, self.axis_world, 0.0)
        return np.concatenate([lin.T, ang.T], axis=0)

    def point_jacobian(self, link_index, world_point, angular=False):
        """Positional (or full 6-row) Jacobian of a point attached to a link."""
        n = self.model.n
        rows = 6 if angular else 3
        J = np.zeros((rows, n))
        for j in range(link_index + 1):
            z = self.axis_world[j]
            if self.model.joints[j].kind == REVOLUTE:
                J[:3, j] = np.cross(z, world_point - self.axis_point[j])
                if angular:
                    J[3:, j] = z
            else:
                J[:3, j] = z
        return J

    def point_jacobians_batch(self, link_indices, world_points):
        """Positional Jacobians for many attached points at once, (m, 3, n).

        Vectorizes point_jacobian over m points; used by the proximity terms
        where per-pair Python loops would dominate the solve time.
        """
        link_indices = np.asarray(link_indices)
        pts = np.asarray(world_points, dtype=float)
        m = pts.shape[0]
        n = self.model.n
        lever = pts[:, None, :] - self.axis_point[None, :, :]        # (m, n, 3)
        rev_cols = _cross(self.axis_world[None, :, :], lever)
        cols = np.where(self.model.revolute_mask[None, :, None], rev_cols,
                        np.broadcast_to(self.axis_world, (m, n, 3)))
        mask = np.arange(n)[None, :] <= link_indices[:, None]         # joint moves point
        cols = cols * mask[:, :, None]
        return np.transpose(cols, (0, 2, 1))

    @cached_property
    def capsule_endpoints(self):
        """World-frame collider segment endpoints, (C, 3) arrays (p0, p1)."""
        links, p0, p1, _ = self.model.collider_arrays
        R = self.link_R[links]          # (C, 3, 3)
        base = self.link_p[links]       # (C, 3)
        w0 = base + np.einsum("cij,cj->ci", R, p0)
        w1 = base + np.einsum("cij,cj->ci", R, p1)
        return w0, w1

    @cached_property
    def world_capsules(self):
        """Collider capsules transformed into the world frame."""
        w0, w1 = self.capsule_endpoints
        radii = self.model.collider_arrays[3]
        return [Capsule(w0[i], w1[i], radii[i]) for i in range(len(radii))]

    def jacobian_derivative(self):
        """d(ee Jacobian)/d(q_k) for every k, shape (n, 6, n).

        Uses the rigid-body perturbation rules: rotating joint k tilts every
        downstream axis by z_k x z_j and moves downstream origins by
        z_k x (p - p_k); a prismatic joint k translates downstream origins
        by z_k and leaves axes unchanged.
        """
        n = self.model.n
        J = self.jacobian
        Z = self.axis_world
        P = self.axis_point
        rev = self.model.revolute_mask

        upstream = (np.arange(n)[:, None] < np.arange(n)[None, :])  # [k, j] k < j
        rev_k = rev[:, None] & upstream
        pri_k = (~rev[:, None]) & upstream

        dz = np.where(rev_k[:, :, None], _cross(Z[:, None, :], Z[None, :, :]), 0.0)
        dp = np.where(
            rev_k[:, :, None],
            _cross(Z[:, None, :], P[None, :, :] - P[:, None, :]),
            0.0,
        )
        dp = np.where(pri_k[:, :, None], Z[:, None, :], dp)

        dpe = J[:3].T  # (n, 3), d p_ee / d q_k
        lever = self.ee_position[None, :] - P  # (n, 3) per column j

        lin_rev = _cross(dz, lever[None, :, :]) + _cross(
            Z[None, :, :], dpe[:, None, :] - dp
        )
        dJ = np.zeros((n, 6, n))
        lin = np.where(rev[None, :, None], lin_rev, dz)
        ang = np.where(rev[None, :, None], dz, 0.0)
        dJ[:, :3, :] = np.transpose(lin, (0, 2, 1))
        dJ[:, 3:, :] = np.transpose(ang, (0, 2, 1))
        return dJ


def forward_kinematics(model: RobotModel, q):
    """Link frames (as Pose list) and end-effector pose at configuration q."""
    kin = Kinematics(model, q)
    frames = [
        Pose(kin.link_p[i], matrix_to_quat(kin.link_R[i])) for i in range(model.n)
    ]
    return frames, kin.ee_pose


def geometric_jacobian(model: RobotModel, q):
    """6 x n world-frame geometric Jacobian (linear m, angular rad rows)."""
    return Kinematics(model, q).jacobian


def link_capsules_world(model: RobotModel, q):
    """World-frame collider capsules at configuration q."""
    return Kinematics(model, q).world_capsules


# ---------------------------------------------------------------------------
# Config document parsing


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise RobotConfigError(where, f"missing required field '{key}'")
    return mapping[key]


def _vec3(value, where):
    try:
        v = np.asarray(value, dtype=float).reshape(3)
    except Exception as exc:
        raise RobotConfigError(where, f"expected 3 numbers, got {value!r}") from exc
    if not np.all(np.isfinite(v)):
        raise RobotConfigError(where, "non-finite component")
    return v


def _origin(value, where):
    if value is None:
        return np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0])
    xyz = _vec3(value.get("xyz", [0, 0, 0]), where + ".xyz")
    if "quat" in value:
        # exact form used by serialize_robot; rpy is the human-authored form
        q = np.asarray(value["quat"], dtype=float).reshape(4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise RobotConfigError(where + ".quat", "quaternion not unit-norm")
        return xyz, q
    rpy = _vec3(value.get("rpy", [0, 0, 0]), where + ".rpy")
    return xyz, matrix_to_quat(rpy_to_matrix(*rpy))


def load_robot(document: str) -> RobotModel:
    """Parse a robot description document (YAML text) into a RobotModel.

    Schema (units meters/radians)::

        robot:
          name: arm            # optional
          base: {xyz: [...], rpy: [...]}       # optional, default identity
          ee_offset: {xyz: [...], rpy: [...]}  # optional
          joints:
            - name: j1
              kind: revolute | prismatic
              axis: [0, 0, 1]
              origin: {xyz: [...], rpy: [...]}
              limits: [lower, upper]
          colliders:
            - {link: 0, p0: [...], p1: [...], radius: 0.05}
    """
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark is not None else ""
        raise RobotConfigError("document", f"invalid YAML{line}: {exc}") from exc
    if not isinstance(doc, dict) or "robot" not in doc:
        raise RobotConfigError("document", "missing top-level 'robot' mapping")
    spec = doc["robot"]

    base_p, base_q = _origin(spec.get("base"), "robot.base")
    ee_p, ee_q = _origin(spec.get("ee_offset"), "robot.ee_offset")

    joints = []
    raw_joints = _require(spec, "joints", "robot")
    if not raw_joints:
        raise RobotConfigError("robot.joints", "chain needs at least one joint")
    for idx, rj in enumerate(raw_joints):
        where = f"robot.joints[{idx}]"
        name = rj.get("name", f"joint{idx}")
        limits = _require(rj, "limits", where)
        if not isinstance(limits, (list, tuple)) or len(limits) != 2:
            raise RobotConfigError(where + ".limits", "expected [lower, upper]")
        off_p, off_q = _origin(rj.get("origin"), where + ".origin")
        joints.append(
            JointSpec(
                name=name,
                kind=_require(rj, "kind", where),
                axis=_vec3(_require(rj, "axis", where), where + ".axis"),
                offset_position=off_p,
                offset_quaternion=off_q,
                limit_lower=float(limits[0]),
                limit_upper=float(limits[1]),
            )
        )

    colliders = []
    for idx, rc in enumerate(spec.get("colliders") or []):
        where = f"robot.colliders[{idx}]"
        colliders.append(
            LinkCollider(
                link_index=int(_require(rc, "link", where)),
                p0=_vec3(_require(rc, "p0", where), where + ".p0"),
                p1=_vec3(_require(rc, "p1", where), where + ".p1"),
                radius=float(_require(rc, "radius", where)),
            )
        )

    return RobotModel(
        joints=tuple(joints),
        base_position=base_p,
        base_quaternion=base_q,
        ee_offset_position=ee_p,
        ee_offset_quaternion=ee_q,
        colliders=tuple(colliders),
        name=spec.get("name", "robot"),
    )


def serialize_robot(model: RobotModel) -> str:
    """Inverse of load_robot; load_robot(serialize_robot(m)) reproduces m."""

    def origin(p, q):
        # store quaternion-derived rpy exactly by emitting the quaternion's
        # rotation as rpy=0 plus an explicit quaternion when non-identity
        return {"xyz": [float(x) for x in p], "quat": [float(x) for x in q]}

    doc = {
        "robot": {
            "name": model.name,
            "base": origin(model.base_position, model.base_quaternion),
            "ee_offset": origin(model.ee_offset_position, model.ee_offset_quaternion),
            "joints": [
                {
                    "name": j.name,
                    "kind": j.kind,
                    "axis": [float(x) for x in j.axis],
                    "origin": origin(j.offset_position, j.offset_quaternion),
                    "limits": [j.limit_lower, j.limit_upper],
                }
                for j in model.joints
            ],
            "colliders": [
                {
                    "link": c.link_index,
                    "p0": [float(x) for x in c.p0],
                    "p1": [float(x) for x in c.p1],
                    "radius": c.radius,
                }
                for c in model.colliders
            ],
        }
    }
    return yaml.safe_dump(doc, sort_keys=False)
