import numpy as np
import pytest

import safeik
import safeik.ik as ik
from safeik.collision import Capsule
from safeik.robot import Kinematics, load_robot
from safeik.se3 import Pose, quat_from_axis_angle

from conftest import random_configs

DT = 1.0 / 90.0


def _fd_gradient(fn, q, h=1e-6):
    q = np.asarray(q, dtype=float)
    g = np.zeros(q.size)
    for k in range(q.size):
        e = np.zeros(q.size)
        e[k] = h
        g[k] = (fn(q + e) - fn(q - e)) / (2 * h)
    return g


def _rel_err(got, want):
    return np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-9)


# ---------------------------------------------------------------- tracking


def test_tracking_zero_at_target(arm):
    q = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    target = Kinematics(arm, q).ee_pose
    v, g = ik.tracking_objective(q, target, arm)
    assert v < 1e-18
    assert np.max(np.abs(g)) < 1e-9


def test_tracking_position_arithmetic(arm):
    q = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    ee = Kinematics(arm, q).ee_pose
    target = Pose(ee.position + [0.01, 0, 0], ee.quaternion)
    w = ik.ObjectiveWeights(track_pos=1.0, track_ori=0.0)
    v, _ = ik.tracking_objective(q, target, arm, w)
    assert v == pytest.approx(1e-4, rel=1e-9)


def test_tracking_gradient_fd(arm):
    rng = np.random.default_rng(30)
    w = ik.ObjectiveWeights()
    for q in random_configs(arm, rng, 100):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        target = Pose(
            rng.uniform(-0.5, 0.5, 3) + [0, 0, 0.8],
            quat_from_axis_angle(axis, rng.uniform(0, 2.5)),
        )
        _, grad = ik.tracking_objective(q, target, arm, w)
        fd = _fd_gradient(lambda x: ik.tracking_objective(x, target, arm, w)[0], q)
        assert _rel_err(grad, fd) < 1e-5


# ---------------------------------------------------------------- smoothness


def _state_with_history(arm, qs, dt=DT):
    state = ik.SolverState.initial(arm, qs[0], dt)
    for q in qs[1:]:
        state.advance(np.asarray(q, dtype=float), Kinematics(arm, np.asarray(q, dtype=float)))
    return state


def test_smoothness_stationary_zero(arm):
    q = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    state = ik.SolverState.initial(arm, q, DT)
    v, g = ik.smoothness_objective(state, q, arm)
    # exact zero up to non-associativity of the third difference (~1e-31)
    assert v < 1e-20
    assert np.max(np.abs(g)) < 1e-8


def test_smoothness_constant_velocity_kills_higher_terms(arm):
    rng = np.random.default_rng(31)
    q0 = random_configs(arm, rng, 1)[0]
    step = rng.normal(scale=1e-3, size=arm.n)
    state = _state_with_history(arm, [q0, q0 + step, q0 + 2 * step])
    cand = q0 + 3 * step
    w = ik.ObjectiveWeights(vel=0.0, acc=1.0, jerk=1.0, cart_vel=0.0)
    v, _ = ik.smoothness_objective(state, cand, arm, w)
    assert v < 1e-18


def test_smoothness_gradient_fd(arm):
    rng = np.random.default_rng(32)
    w = ik.ObjectiveWeights()
    for _ in range(100):
        qs = random_configs(arm, rng, 3)
        state = _state_with_history(arm, qs)
        cand = qs[-1] + rng.normal(scale=5e-3, size=arm.n)
        _, grad = ik.smoothness_objective(state, cand, arm, w)
        fd = _fd_gradient(lambda x: ik.smoothness_objective(state, x, arm, w)[0], cand)
        assert _rel_err(grad, fd) < 1e-5


# ---------------------------------------------------------------- self collision


def test_selfcol_stretched_arm_near_zero(arm):
    v, _ = ik.self_collision_objective(np.zeros(7), arm)
    assert v < 1e-2


TOUCHING = """
robot:
  joints:
    - {name: a, kind: prismatic, axis: [1, 0, 0], limits: [-1, 1]}
    - {name: b, kind: prismatic, axis: [0, 1, 0], origin: {xyz: [0.3, 0, 0]}, limits: [-1, 1]}
    - {name: c, kind: prismatic, axis: [0, 0, 1], limits: [-1, 1]}
  colliders:
    - {link: 0, p0: [0, 0, 0], p1: [0, 0, 0], radius: 0.1}
    - {link: 2, p0: [0, 0, 0], p1: [0, 0, 0], radius: 0.2}
"""


def test_selfcol_touching_pair_formula():
    model = load_robot(TOUCHING)
    # spheres at x=0 (r=0.1) and x=0.3 (r=0.2): surfaces touch exactly
    w_selfcol, delta = 0.37, 1e-3
    v, _ = ik.self_collision_objective(np.zeros(3), model, w_selfcol, delta)
    assert v == pytest.approx(w_selfcol / delta, rel=1e-12)


def _selfcol_stencil_stable(model, q, h):
    from safeik.collision import segment_closest_points_batch

    idx_a, idx_b = model.self_collision_pair_arrays

    def signature(qq):
        kin = Kinematics(model, qq)
        w0, w1 = kin.capsule_endpoints
        s, t, dist = segment_closest_points_batch(w0[idx_a], w1[idx_a], w0[idx_b], w1[idx_b])
        if np.any(dist < 1e-9):
            return None
        tol = 1e-7
        return tuple(
            (bool(si < tol), bool(si > 1 - tol), bool(ti < tol), bool(ti > 1 - tol))
            for si, ti in zip(s, t)
        )

    base = signature(q)
    if base is None:
        return False
    for k in range(model.n):
        e = np.zeros(model.n)
        e[k] = h
        if signature(q + e) != base or signature(q - e) != base:
            return False
    return True


def test_selfcol_gradient_fd(arm):
    rng = np.random.default_rng(33)
    checked = 0
    tried = 0
    while checked < 100 and tried < 500:
        tried += 1
        q = random_configs(arm, rng, 1)[0]
        if not _selfcol_stencil_stable(arm, q, 1e-6):
            continue
        _, grad = ik.self_collision_objective(q, arm)
        fd = _fd_gradient(lambda x: ik.self_collision_objective(x, arm)[0], q)
        assert _rel_err(grad, fd) < 1e-4
        checked += 1
    assert checked == 100


# ---------------------------------------------------------------- manipulability


def test_manip_single_revolute_feasible():
    doc = """
robot:
  ee_offset: {xyz: [1, 0, 0]}
  joints:
    - {name: a, kind: revolute, axis: [0, 0, 1], limits: [-3.2, 3.2]}
"""
    model = load_robot(doc)
    params = ik.ManipulabilityParams(sigma_min_threshold=0.1, condition_number_cap=1e6)
    c, _ = ik.manipulability_constraint(np.zeros(1), model, params)
    assert c < 0


def test_manip_boundary_sigma(arm):
    q = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    # same economy-SVD driver the constraint uses (values-only differs by ulps)
    s_min = np.linalg.svd(Kinematics(arm, q).jacobian, full_matrices=False)[1][-1]
    params = ik.ManipulabilityParams(sigma_min_threshold=float(s_min), condition_number_cap=1e9)
    c, _ = ik.manipulability_constraint(q, arm, params)
    # first term exactly zero, cap term deeply negative: softmax sits at 0+
    assert 0.0 <= c < 1e-12


def test_manip_gradient_fd(arm):
    rng = np.random.default_rng(34)
    params = ik.ManipulabilityParams()
    count = 0
    for q in random_configs(arm, rng, 60):
        s = np.linalg.svd(Kinematics(arm, q).jacobian, compute_uv=False)
        if s[-1] < 1e-3 or (s[-2] - s[-1]) < 1e-3:  # FD invalid near repeated sigma
            continue
        _, grad = ik.manipulability_constraint(q, arm, params)
        fd = _fd_gradient(lambda x: ik.manipulability_constraint(x, arm, params)[0], q)
        assert _rel_err(grad, fd) < 1e-4
        count += 1
    assert count >= 30


def test_manip_step_recovers_from_near_singularity(arm):
    q0 = np.array([0.0, 0.02, 0.0, -0.02, 0.0, 0.01, 0.0])  # nearly stretched
    state = ik.SolverState.initial(arm, q0, DT)
    kin = Kinematics(arm, q0)
    s_before = np.linalg.svd(kin.jacobian, compute_uv=False)[-1]
    c, _ = ik.manipulability_constraint(q0, arm)
    assert c > 0  # infeasible at the near-singular pose
    q1, diag = ik.solve_step("N", state, kin.ee_pose, [], arm)
    s_after = np.linalg.svd(Kinematics(arm, q1).jacobian, compute_uv=False)[-1]
    assert s_after > s_before


# ---------------------------------------------------------------- class-K and CBF


def test_class_k_values():
    assert ik.class_k(0.0, ik.CbfParams(gamma=1.0, beta=1.0)) == 0.0
    assert ik.class_k(1.0, ik.CbfParams(gamma=1.0, beta=1.0)) == pytest.approx(2.0)
    assert ik.class_k(-0.1, ik.CbfParams(gamma=2.0, beta=0.5)) == pytest.approx(-0.2005)


def _barrier_setup(arm, obstacles):
    q = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    state = ik.SolverState.initial(arm, q, DT)
    return q, state


def test_cbf_single_obstacle_exact(arm):
    obstacle = Capsule([0.45, 0.1, 0.9], [0.45, 0.1, 0.9], 0.05)
    q, state = _barrier_setup(arm, [obstacle])
    params = ik.CbfParams()
    data = ik.prepare_cbf_data(state, [obstacle], arm, params)
    cand = q + 0.01
    c, _ = ik.cbf_constraint(cand, state, [obstacle], arm, params)
    term = float(-(data.grads[0] @ (cand - q)) - data.k_of_h[0])
    assert c == pytest.approx(term, abs=1e-15)


def test_cbf_two_identical_obstacles(arm):
    obstacle = Capsule([0.45, 0.1, 0.9], [0.45, 0.1, 0.9], 0.05)
    q, state = _barrier_setup(arm, [obstacle])
    params = ik.CbfParams(temperature=200.0)
    cand = q + 0.005
    c1, _ = ik.cbf_constraint(cand, state, [obstacle], arm, params)
    c2, _ = ik.cbf_constraint(cand, state, [obstacle, obstacle], arm, params)
    assert c2 == pytest.approx(c1 + np.log(2.0) / 200.0, abs=1e-12)


def test_cbf_lse_close_to_max(arm):
    rng = np.random.default_rng(35)
    obstacles = [
        Capsule(c, c + rng.uniform(-0.1, 0.1, 3), rng.uniform(0.02, 0.08))
        for c in (rng.uniform(-0.4, 0.4, (5, 3)) + [0.2, 0, 0.9])
    ]
    q, state = _barrier_setup(arm, obstacles)
    params = ik.CbfParams(temperature=200.0)
    data = ik.prepare_cbf_data(state, obstacles, arm, params)
    cand = q + rng.normal(scale=0.01, size=arm.n)
    c, _ = ik.cbf_constraint_from_data(data, cand, params)
    terms = ik.cbf_terms(data, cand)
    assert c >= terms.max() - 1e-15
    assert c - terms.max() <= np.log(5.0) / 200.0 + 1e-15


def test_cbf_gradient_fd(arm):
    rng = np.random.default_rng(36)
    obstacles = [
        Capsule(c, c + rng.uniform(-0.1, 0.1, 3), rng.uniform(0.02, 0.08))
        for c in (rng.uniform(-0.4, 0.4, (5, 3)) + [0.2, 0, 0.9])
    ]
    q, state = _barrier_setup(arm, obstacles)
    params = ik.CbfParams()
    data = ik.prepare_cbf_data(state, obstacles, arm, params)
    for _ in range(100):
        cand = q + rng.normal(scale=0.02, size=arm.n)
        _, grad = ik.cbf_constraint_from_data(data, cand, params)
        fd = _fd_gradient(lambda x: ik.cbf_constraint_from_data(data, x, params)[0], cand)
        assert _rel_err(grad, fd) < 2e-6


def test_cbf_deep_violation_finite(arm):
    # obstacle swallowing the wrist: h << -10 epsilon, no overflow
    obstacle = Capsule([0.2, 0.0, 0.9], [0.2, 0.0, 0.9], 0.8)
    q, state = _barrier_setup(arm, [obstacle])
    params = ik.CbfParams(temperature=500.0)
    c, grad = ik.cbf_constraint(q + 0.01, state, [obstacle], arm, params)
    assert np.isfinite(c) and np.all(np.isfinite(grad))


def test_cbf_requires_obstacles(arm):
    q, state = _barrier_setup(arm, [])
    with pytest.raises(ValueError):
        ik.cbf_constraint(q, state, [], arm)


# ---------------------------------------------------------------- penalty


def test_penalty_arithmetic():
    doc = """
robot:
  joints:
    - {name: a, kind: prismatic, axis: [1, 0, 0], limits: [-1, 1]}
  colliders:
    - {link: 0, p0: [0, 0, 0], p1: [0, 0, 0], radius: 0.05}
"""
    model = load_robot(doc)
    # phi = 0.3 - 0.05 = 0.25; w_safe = (5*0.05)^2 = 0.0625; value ~ 1.0
    obstacle = Capsule([0.3, 0, 0], [0.3, 0, 0], 0.0)
    params = ik.PenaltyParams(epsilon=0.05, delta=1e-12, w_col=1.0)
    v, _ = ik.penalty_objective(np.zeros(1), [obstacle], model, params)
    assert v == pytest.approx(1.0, rel=1e-9)


def test_penalty_contact_value():
    doc = """
robot:
  joints:
    - {name: a, kind: prismatic, axis: [1, 0, 0], limits: [-1, 1]}
  colliders:
    - {link: 0, p0: [0, 0, 0], p1: [0, 0, 0], radius: 0.05}
"""
    model = load_robot(doc)
    obstacle = Capsule([0.05, 0, 0], [0.05, 0, 0], 0.0)  # phi = 0
    params = ik.PenaltyParams(epsilon=0.05, delta=1e-4, w_col=2.0)
    v, _ = ik.penalty_objective(np.zeros(1), [obstacle], model, params)
    assert v == pytest.approx(2.0 * 0.0625 / 1e-4, rel=1e-12)


def test_penalty_monotone_in_distance():
    doc = """
robot:
  joints:
    - {name: a, kind: prismatic, axis: [1, 0, 0], limits: [-2, 2]}
  colliders:
    - {link: 0, p0: [0, 0, 0], p1: [0, 0, 0], radius: 0.05}
"""
    model = load_robot(doc)
    params = ik.PenaltyParams()
    values = []
    for x in np.linspace(0.2, 1.5, 30):
        obstacle = Capsule([x, 0, 0], [x, 0, 0], 0.0)
        v, _ = ik.penalty_objective(np.zeros(1), [obstacle], model, params)
        values.append(v)
    assert all(np.diff(values) < 0)


def _penalty_stencil_stable(model, q, obstacles, h):
    from safeik.collision import segment_closest_points_batch
    from safeik.ik import obstacle_arrays

    o0, o1, orad = obstacle_arrays(obstacles)

    def signature(qq):
        kin = Kinematics(model, qq)
        w0, w1 = kin.capsule_endpoints
        L, O = len(w0), len(orad)
        a0 = np.broadcast_to(w0[:, None, :], (L, O, 3))
        a1 = np.broadcast_to(w1[:, None, :], (L, O, 3))
        b0 = np.broadcast_to(o0[None, :, :], (L, O, 3))
        b1 = np.broadcast_to(o1[None, :, :], (L, O, 3))
        s, t, dist = segment_closest_points_batch(a0, a1, b0, b1)
        if np.any(dist < 1e-9):
            return None
        tol = 1e-7
        return (s < tol).tobytes() + (s > 1 - tol).tobytes() + (t < tol).tobytes() + (
            t > 1 - tol
        ).tobytes()

    base = signature(q)
    if base is None:
        return False
    for k in range(model.n):
        e = np.zeros(model.n)
        e[k] = h
        if signature(q + e) != base or signature(q - e) != base:
            return False
    return True


def test_penalty_gradient_fd(arm):
    rng = np.random.default_rng(37)
    params = ik.PenaltyParams()
    checked = 0
    tried = 0
    while checked < 100 and tried < 500:
        tried += 1
        q = random_configs(arm, rng, 1)[0]
        centers = rng.uniform(-0.6, 0.6, (3, 3)) + [0.1, 0, 0.8]
        obstacles = [
            Capsule(c, c + rng.uniform(-0.2, 0.2, 3), rng.uniform(0.02, 0.1)) for c in centers
        ]
        if not _penalty_stencil_stable(arm, q, obstacles, 1e-6):
            continue
        _, grad = ik.penalty_objective(q, obstacles, arm, params)
        fd = _fd_gradient(lambda x: ik.penalty_objective(x, obstacles, arm, params)[0], q)
        assert _rel_err(grad, fd) < 1e-4
        checked += 1
    assert checked == 100


# ---------------------------------------------------------------- solve_step


def test_solve_step_vacuous_barrier_bit_identical(arm):
    q0 = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    target0 = Kinematics(arm, q0).ee_pose
    results = {}
    for kind in ("N", "B"):
        state = ik.SolverState.initial(arm, q0, DT)
        qs = []
        for i in range(40):
            target = Pose(target0.position + [0, 0.002 * i, 0.001 * i], target0.quaternion)
            qn, _ = ik.solve_step(kind, state, target, [], arm)
            qs.append(qn.copy())
        results[kind] = np.stack(qs)
    assert results["N"].tobytes() == results["B"].tobytes()


def test_solve_step_far_obstacle_matches_nominal(arm):
    q0 = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    target0 = Kinematics(arm, q0).ee_pose
    far = [Capsule([5.0, 5.0, 5.0], [5.0, 5.0, 5.2], 0.1)]
    qs = {}
    for kind, obstacles in (("N", []), ("B", far)):
        state = ik.SolverState.initial(arm, q0, DT)
        out = []
        for i in range(30):
            target = Pose(target0.position + [0.001 * i, 0, 0], target0.quaternion)
            qn, _ = ik.solve_step(kind, state, target, obstacles, arm)
            out.append(qn.copy())
        qs[kind] = np.stack(out)
    assert np.max(np.abs(qs["N"] - qs["B"])) < 1e-6


def test_solve_step_barrier_holds_margin_against_penetrating_target(arm):
    q0 = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    kin0 = Kinematics(arm, q0)
    ee0 = kin0.ee_pose
    # obstacle placed 12 cm in front of the tool, target deep inside it
    center = ee0.position + np.array([0.12, 0.0, 0.0])
    obstacle = Capsule(center, center + [0.0, 0.0, 0.12], 0.05)
    target = Pose(center + [0.0, 0.0, 0.06], ee0.quaternion)

    params = ik.IkParams()
    state = ik.SolverState.initial(arm, q0, DT)
    phis = []
    for _ in range(200):
        _, diag = ik.solve_step("B", state, target, [obstacle], arm, params)
        phis.append(diag.phi_min)
    phis = np.array(phis)
    assert np.min(phis) >= -0.002          # discrete-time overshoot bound
    assert phis[-1] >= params.cbf.epsilon - 0.005


def test_solve_step_infeasible_holds_configuration(arm):
    q0 = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
    state = ik.SolverState.initial(arm, q0, DT)
    # obstacle engulfing the whole arm: h deeply negative and ungradable
    obstacle = Capsule([0.0, 0.0, 0.6], [0.0, 0.0, 0.6], 2.0)
    target = Kinematics(arm, q0).ee_pose
    qn, diag = ik.solve_step("B", state, target, [obstacle], arm)
    # either the solver relaxes (reported honestly) or holds; never crashes
    assert qn.shape == (7,)
    assert diag.status in ("held", "converged", "max_iter", "infeasible_qp", "time_budget")
    if diag.held:
        assert np.array_equal(qn, q0)
