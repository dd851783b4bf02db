"""Capsule collision geometry: closest points between segments, signed
capsule distances with witness points, robot/obstacle minimum-distance
queries, and configuration-space distance gradients.

Signed distance phi is negative under penetration. Witness points on the
center segments realize the segment distance; surface points lie along the
witness line. Gradients use the envelope theorem: d(phi)/dq is the contact
normal projected through the positional Jacobian of the robot witness point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_EPS = 1e-9  # witness coincidence threshold, meters


@dataclass(frozen=True)
class Capsule:
    """Points within `radius` of segment p0-p1. radius 0 degenerates to a
    segment, p0 == p1 to a sphere (or point)."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(3))
        if self.radius < 0.0:
            raise ValueError("capsule radius must be >= 0")

    def translated(self, offset) -> "Capsule":
        offset = np.asarray(offset, dtype=float)
        return Capsule(self.p0 + offset, self.p1 + offset, self.radius)


@dataclass(frozen=True)
class DistanceWitness:
    """Signed distance between two capsules plus the realizing points.

    seg_a/seg_b sit on the center segments; point_a/point_b on the capsule
    surfaces along the witness line. pair is (index into the link capsule
    list, obstacle index) when produced by a robot/obstacle query.
    """

    phi: float
    point_a: np.ndarray
    point_b: np.ndarray
    seg_a: np.ndarray
    seg_b: np.ndarray
    seg_distance: float
    pair: tuple = (0, 0)
    degenerate: bool = False


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def segment_closest_points_batch(a0, a1, b0, b1):
    """Vectorized closest points between segment pairs.

    All inputs (..., 3). Returns (s, t, dist) with s, t in [0, 1] such that
    a0 + s*(a1-a0) and b0 + t*(b1-b0) realize the minimum distance.
    """
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)

    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = _dot(d1, d1)
    e = _dot(d2, d2)
    f = _dot(d2, r)
    c = _dot(d1, r)
    b = _dot(d1, d2)

    eps = 1e-14
    a_safe = np.where(a > eps, a, 1.0)
    e_safe = np.where(e > eps, e, 1.0)

    denom = a * e - b * b
    denom_safe = np.where(denom > eps, denom, 1.0)
    s = np.where(denom > eps, np.clip((b * f - c * e) / denom_safe, 0.0, 1.0), 0.0)

    t_raw = (b * s + f) / e_safe
    t = np.clip(t_raw, 0.0, 1.0)
    s = np.where(t_raw < 0.0, np.clip(-c / a_safe, 0.0, 1.0), s)
    s = np.where(t_raw > 1.0, np.clip((b - c) / a_safe, 0.0, 1.0), s)

    # degenerate segments: points
    s = np.where(a <= eps, 0.0, s)
    t = np.where(a <= eps, np.clip(f / e_safe, 0.0, 1.0), t)
    t = np.where(e <= eps, 0.0, t)
    s = np.where((e <= eps) & (a > eps), np.clip(-c / a_safe, 0.0, 1.0), s)

    pa = a0 + s[..., None] * d1
    pb = b0 + t[..., None] * d2
    dist = np.linalg.norm(pa - pb, axis=-1)
    return s, t, dist


def segment_closest_points(a0, a1, b0, b1):
    """Closest points between two segments; returns (s, t, dist)."""
    s, t, dist = segment_closest_points_batch(
        np.asarray(a0)[None], np.asarray(a1)[None], np.asarray(b0)[None], np.asarray(b1)[None]
    )
    return float(s[0]), float(t[0]), float(dist[0])


def _witness_from_seg(pa, pb, dist, radius_a, radius_b, pair):
    phi = dist - radius_a - radius_b
    if dist < DEGENERATE_EPS:
        return DistanceWitness(
            phi=float(phi),
            point_a=pa,
            point_b=pb,
            seg_a=pa,
            seg_b=pb,
            seg_distance=float(dist),
            pair=pair,
            degenerate=True,
        )
    n_hat = (pa - pb) / dist
    return DistanceWitness(
        phi=float(phi),
        point_a=pa - n_hat * radius_a,
        point_b=pb + n_hat * radius_b,
        seg_a=pa,
        seg_b=pb,
        seg_distance=float(dist),
        pair=pair,
    )


def _capsule_key(c: Capsule):
    return (c.radius, *c.p0.tolist(), *c.p1.tolist())


def capsule_signed_distance(cap_a: Capsule, cap_b: Capsule, pair=(0, 0)) -> DistanceWitness:
    """Signed distance with witness points; symmetric under argument swap
    exactly (arguments are ordered canonically before the computation)."""
    if _capsule_key(cap_b) < _capsule_key(cap_a):
        w = capsule_signed_distance(cap_b, cap_a, pair)
        return DistanceWitness(
            phi=w.phi,
            point_a=w.point_b,
            point_b=w.point_a,
            seg_a=w.seg_b,
            seg_b=w.seg_a,
            seg_distance=w.seg_distance,
            pair=pair,
            degenerate=w.degenerate,
        )
    s, t, dist = segment_closest_points(cap_a.p0, cap_a.p1, cap_b.p0, cap_b.p1)
    pa = cap_a.p0 + s * (cap_a.p1 - cap_a.p0)
    pb = cap_b.p0 + t * (cap_b.p1 - cap_b.p0)
    return _witness_from_seg(pa, pb, dist, cap_a.radius, cap_b.radius, pair)


def pairwise_capsule_distances(caps_a, caps_b):
    """All-pairs signed distances between two capsule lists.

    Returns (phi, seg_a, seg_b, dist) with shapes (LA, LB), (LA, LB, 3),
    (LA, LB, 3), (LA, LB). Hot path for the IK terms; witness objects are
    only built where callers need them.
    """
    la, lb = len(caps_a), len(caps_b)
    a0 = np.stack([c.p0 for c in caps_a])[:, None, :]
    a1 = np.stack([c.p1 for c in caps_a])[:, None, :]
    b0 = np.stack([c.p0 for c in caps_b])[None, :, :]
    b1 = np.stack([c.p1 for c in caps_b])[None, :, :]
    ra = np.array([c.radius for c in caps_a])[:, None]
    rb = np.array([c.radius for c in caps_b])[None, :]

    a0b = np.broadcast_to(a0, (la, lb, 3))
    a1b = np.broadcast_to(a1, (la, lb, 3))
    b0b = np.broadcast_to(b0, (la, lb, 3))
    b1b = np.broadcast_to(b1, (la, lb, 3))
    s, t, dist = segment_closest_points_batch(a0b, a1b, b0b, b1b)
    seg_a = a0b + s[..., None] * (a1b - a0b)
    seg_b = b0b + t[..., None] * (b1b - b0b)
    phi = dist - ra - rb
    return phi, seg_a, seg_b, dist


def min_robot_obstacle_distance(links, obstacles):
    """Per-obstacle and global minimum signed distances.

    links/obstacles are capsule lists. Returns (global_witness, per_obstacle)
    where per_obstacle[o] is the closest-link witness against obstacle o.
    An empty obstacle list is the distinguished "no obstacles" result
    (None, []); callers treat the barrier constraint as absent.
    """
    if len(links) == 0:
        raise ValueError("link capsule list must be non-empty")
    if len(obstacles) == 0:
        return None, []

    phi, seg_a, seg_b, dist = pairwise_capsule_distances(links, obstacles)
    per_obstacle = []
    for o in range(len(obstacles)):
        li = int(np.argmin(phi[:, o]))
        per_obstacle.append(
            _witness_from_seg(
                seg_a[li, o],
                seg_b[li, o],
                float(dist[li, o]),
                links[li].radius,
                obstacles[o].radius,
                pair=(li, o),
            )
        )
    global_witness = min(per_obstacle, key=lambda w: w.phi)
    return global_witness, per_obstacle


def distance_gradient(model, q, obstacle, witness, kin=None):
    """Gradient of the witness pair's signed distance w.r.t. joint vector q.

    The witness must have been produced at configuration q. Returns an
    n-vector; a degenerate witness (coincident segment points, no defined
    normal) yields the zero gradient — callers see witness.degenerate and
    may reuse a previous direction instead.
    """
    from .robot import Kinematics  # local import to avoid cycle

    if kin is None:
        kin = Kinematics(model, q)
    n = model.n
    if witness.degenerate:
        return np.zeros(n)
    n_hat = (witness.seg_a - witness.seg_b) / witness.seg_distance
    link_index = model.colliders[witness.pair[0]].link_index
    jp = kin.point_jacobian(link_index, witness.seg_a)
    return jp.T @ n_hat
