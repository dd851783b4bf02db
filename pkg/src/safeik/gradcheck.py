"""Finite-difference audit of every analytic gradient, exposed through the
CLI. Witness-switch configurations (where proximity minima change hands
inside the stencil) are detected and skipped, since the analytic gradients
are one-sided there by design.
"""

from __future__ import annotations

import numpy as np

from . import ik, load_bundled_robot
from .collision import (
    Capsule,
    capsule_signed_distance,
    distance_gradient,
    min_robot_obstacle_distance,
)
from .robot import Kinematics
from .se3 import Pose, quat_conj, quat_from_axis_angle, quat_log, quat_mul

FD_STEP = 1e-6


def _fd(fn, x, h=FD_STEP):
    g = np.zeros(len(x))
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        g[k] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _rel(got, want):
    return float(np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-9))


def _random_q(model, rng):
    return rng.uniform(model.limits_lower + 0.25, model.limits_upper - 0.25)


def _random_obstacle(rng):
    c = rng.uniform(-0.6, 0.6, 3) + [0.1, 0.0, 0.8]
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return Capsule(c, c + axis * rng.uniform(0.0, 0.4), rng.uniform(0.02, 0.15))


def check_fk_jacobian(model, rng, samples):
    worst = 0.0
    for _ in range(samples):
        q = _random_q(model, rng)
        J = Kinematics(model, q).jacobian
        scale = max(1.0, np.abs(J).max())
        for k in range(model.n):
            e = np.zeros(model.n)
            e[k] = FD_STEP
            kp, km = Kinematics(model, q + e), Kinematics(model, q - e)
            dpos = (kp.ee_position - km.ee_position) / (2 * FD_STEP)
            drot = quat_log(
                quat_mul(kp.ee_pose.quaternion, quat_conj(km.ee_pose.quaternion))
            ) / (2 * FD_STEP)
            worst = max(worst, float(np.max(np.abs(J[:3, k] - dpos))) / scale)
            worst = max(worst, float(np.max(np.abs(J[3:, k] - drot))) / scale)
    return worst, samples


def check_distance(model, rng, samples):
    worst = 0.0
    checked = 0
    tried = 0
    while checked < samples and tried < samples * 6:
        tried += 1
        q = _random_q(model, rng)
        obstacle = _random_obstacle(rng)

        def phi_of(qq):
            caps = Kinematics(model, qq).world_capsules
            _, per = min_robot_obstacle_distance(caps, [obstacle])
            return per[0]

        base = phi_of(q)
        if base.degenerate:
            continue
        caps = Kinematics(model, q).world_capsules
        phis = sorted(capsule_signed_distance(c, obstacle).phi for c in caps)
        if len(phis) > 1 and phis[1] - phis[0] < 1e-4:
            continue
        grad = distance_gradient(model, q, obstacle, base)
        fd = _fd(lambda x: phi_of(x).phi, q)
        worst = max(worst, _rel(grad, fd))
        checked += 1
    return worst, checked


def _check_term(fn_value_grad, sample_args, samples):
    worst = 0.0
    for args in sample_args(samples):
        value_grad, point = args
        _, grad = value_grad(point)
        fd = _fd(lambda x: value_grad(x)[0], point)
        worst = max(worst, _rel(grad, fd))
    return worst, samples


def _proximity_clamp_signature(model, q, obstacles=None):
    """Clamp pattern of every proximity pair at q; None when degenerate."""
    from .collision import segment_closest_points_batch
    from .ik import obstacle_arrays

    kin = Kinematics(model, q)
    w0, w1 = kin.capsule_endpoints
    if obstacles is None:
        ia, ib = model.self_collision_pair_arrays
        a0, a1, b0, b1 = w0[ia], w1[ia], w0[ib], w1[ib]
    else:
        o0, o1, orad = obstacle_arrays(obstacles)
        L, O = len(w0), len(orad)
        a0 = np.broadcast_to(w0[:, None, :], (L, O, 3)).reshape(-1, 3)
        a1 = np.broadcast_to(w1[:, None, :], (L, O, 3)).reshape(-1, 3)
        b0 = np.broadcast_to(o0[None, :, :], (L, O, 3)).reshape(-1, 3)
        b1 = np.broadcast_to(o1[None, :, :], (L, O, 3)).reshape(-1, 3)
    s, t, dist = segment_closest_points_batch(a0, a1, b0, b1)
    if np.any(dist < 1e-9):
        return None
    tol = 1e-7
    return ((s < tol).tobytes(), (s > 1 - tol).tobytes(),
            (t < tol).tobytes(), (t > 1 - tol).tobytes())


def _stencil_stable(model, q, obstacles=None, h=FD_STEP):
    base = _proximity_clamp_signature(model, q, obstacles)
    if base is None:
        return False
    for k in range(model.n):
        e = np.zeros(model.n)
        e[k] = h
        if (_proximity_clamp_signature(model, q + e, obstacles) != base
                or _proximity_clamp_signature(model, q - e, obstacles) != base):
            return False
    return True


def run_all(samples=25, seed=123):
    """Return [(name, worst relative error, tolerance, checked)] per term."""
    model = load_bundled_robot()
    rng = np.random.default_rng(seed)
    results = []
    worst, n = check_fk_jacobian(model, rng, samples)
    results.append(("fk_jacobian", worst, 1e-5, n))

    worst, n = check_distance(model, rng, samples)
    results.append(("distance", worst, 1e-4, n))

    weights = ik.ObjectiveWeights()

    def tracking_samples(ns):
        for _ in range(ns):
            q = _random_q(model, rng)
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            target = Pose(rng.uniform(-0.5, 0.5, 3) + [0, 0, 0.8],
                          quat_from_axis_angle(axis, rng.uniform(0, 2.5)))
            yield (lambda x, t=target: ik.tracking_objective(x, t, model, weights)), q

    worst = 0.0
    for fn, q in tracking_samples(samples):
        _, grad = fn(q)
        worst = max(worst, _rel(grad, _fd(lambda x: fn(x)[0], q)))
    results.append(("tracking", worst, 1e-5, samples))

    worst = 0.0
    for _ in range(samples):
        qs = [_random_q(model, rng) for _ in range(3)]
        state = ik.SolverState.initial(model, qs[0], 1.0 / 90.0)
        for q in qs[1:]:
            state.advance(q, Kinematics(model, q))
        cand = qs[-1] + rng.normal(scale=5e-3, size=model.n)
        _, grad = ik.smoothness_objective(state, cand, model, weights)
        fd = _fd(lambda x: ik.smoothness_objective(state, x, model, weights)[0], cand)
        worst = max(worst, _rel(grad, fd))
    results.append(("smoothness", worst, 1e-5, samples))

    worst = 0.0
    checked = 0
    tried = 0
    while checked < samples and tried < samples * 8:
        tried += 1
        q = _random_q(model, rng)
        if not _stencil_stable(model, q):
            continue
        _, grad = ik.self_collision_objective(q, model)
        fd = _fd(lambda x: ik.self_collision_objective(x, model)[0], q)
        worst = max(worst, _rel(grad, fd))
        checked += 1
    results.append(("self_collision", worst, 1e-4, checked))

    pparams = ik.PenaltyParams()
    worst = 0.0
    checked = 0
    tried = 0
    while checked < samples and tried < samples * 8:
        tried += 1
        q = _random_q(model, rng)
        obstacles = [_random_obstacle(rng) for _ in range(3)]
        if not _stencil_stable(model, q, obstacles):
            continue
        _, grad = ik.penalty_objective(q, obstacles, model, pparams)
        fd = _fd(lambda x: ik.penalty_objective(x, obstacles, model, pparams)[0], q)
        worst = max(worst, _rel(grad, fd))
        checked += 1
    results.append(("penalty", worst, 1e-4, checked))

    cparams = ik.CbfParams()
    worst = 0.0
    for _ in range(samples):
        q = _random_q(model, rng)
        state = ik.SolverState.initial(model, q, 1.0 / 90.0)
        obstacles = [_random_obstacle(rng) for _ in range(4)]
        data = ik.prepare_cbf_data(state, obstacles, model, cparams)
        cand = q + rng.normal(scale=0.02, size=model.n)
        _, grad = ik.cbf_constraint_from_data(data, cand, cparams)
        fd = _fd(lambda x: ik.cbf_constraint_from_data(data, x, cparams)[0], cand)
        worst = max(worst, _rel(grad, fd))
    results.append(("cbf", worst, 1e-5, samples))

    return results
