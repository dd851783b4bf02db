"""The three IK formulations, one joint-configuration update per control tick.

* kind "N" (nominal): pose tracking + smoothness + self-collision proximity,
  subject to a manipulability constraint and joint limits. Obstacles ignored.
* kind "P" (penalty): N plus a soft proximity penalty summed over every
  link-obstacle capsule pair.
* kind "B" (barrier): N plus a hard discrete barrier inequality. Per obstacle
  o, h_o = phi_o - epsilon at the previous configuration; the constraint
  bounds the linearized decrease -grad(h_o)' dq - K(h_o) <= 0 with
  K(h) = gamma*h + beta*h^3, aggregated over obstacles by a temperature-T
  log-sum-exp so the active constraint never switches discontinuously.

All gradients are analytic (witness-point chain rule through the geometric
Jacobian); the SVD-based manipulability gradient falls back to finite
differences only if the Jacobian collapses numerically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .collision import min_robot_obstacle_distance
from .robot import Kinematics, RobotModel
from .se3 import Pose, orientation_error
from .sqp import (
    STATUS_CONVERGED,
    STATUS_INFEASIBLE_QP,
    STATUS_NONFINITE,
    NlpProblem,
    SolveOptions,
    SqpSolver,
)

KIND_NOMINAL = "N"
KIND_PENALTY = "P"
KIND_BARRIER = "B"
SOLVER_KINDS = (KIND_NOMINAL, KIND_PENALTY, KIND_BARRIER)


@dataclass(frozen=True)
class ObjectiveWeights:
    """Nonnegative weights of the nominal objective terms."""

    track_pos: float = 1.0
    track_ori: float = 0.5
    vel: float = 5e-4
    acc: float = 3e-7
    jerk: float = 1e-11
    cart_vel: float = 1e-4
    selfcol: float = 2e-6

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0.0:
                raise ValueError(f"weight {name} must be >= 0")


@dataclass(frozen=True)
class CbfParams:
    epsilon: float = 0.03      # safety margin, meters
    gamma: float = 0.4         # linear class-K coefficient
    beta: float = 40.0         # cubic class-K coefficient, 1/m^2
    temperature: float = 150.0  # log-sum-exp sharpness

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"CBF parameter {name} must be > 0")


@dataclass(frozen=True)
class PenaltyParams:
    epsilon: float = 0.03
    delta: float = 1e-4  # m^2, keeps the proximity penalty finite at contact
    w_col: float = 1e-5

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError("penalty delta must be > 0")
        if self.epsilon <= 0.0:
            raise ValueError("penalty epsilon must be > 0")
        if self.w_col < 0.0:
            raise ValueError("w_col must be >= 0")

    @property
    def w_safe(self):
        # derived scale, never stored independently
        return (5.0 * self.epsilon) ** 2


@dataclass(frozen=True)
class ManipulabilityParams:
    sigma_min_threshold: float = 0.02
    condition_number_cap: float = 500.0
    softmax_temperature: float = 0.01

    def __post_init__(self):
        if self.sigma_min_threshold <= 0.0:
            raise ValueError("sigma_min_threshold must be > 0")
        if self.condition_number_cap <= 1.0:
            raise ValueError("condition_number_cap must be > 1")


@dataclass(frozen=True)
class IkParams:
    """Everything a solve_step needs beyond the scene itself."""

    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    cbf: CbfParams = field(default_factory=CbfParams)
    penalty: PenaltyParams = field(default_factory=PenaltyParams)
    manip: ManipulabilityParams = field(default_factory=ManipulabilityParams)
    selfcol_delta: float = 1e-3  # m^2
    # per-tick joint step cap (radians); acts as a joint-velocity limit and
    # keeps updates small enough for the linearized barrier to be valid
    step_cap: float = 0.06
    # control-loop solves do not need the library-default 1e-8 stationarity
    sqp: SolveOptions = field(default_factory=lambda: SolveOptions(objective_tolerance=1e-6))


@dataclass
class SolverState:
    """Current configuration plus the short history the smoothness terms and
    the discrete barrier need. One state per robot; solve_step mutates it."""

    q: np.ndarray
    history: list  # [q_{t-1}, q_{t-2}, q_{t-3}]
    last_ee: Pose
    dt: float
    kin: Kinematics | None = None

    @classmethod
    def initial(cls, model: RobotModel, q0, dt):
        if dt <= 0.0:
            raise ValueError("control period dt must be > 0")
        q0 = np.asarray(q0, dtype=float).copy()
        kin = Kinematics(model, q0)
        return cls(q=q0, history=[q0.copy(), q0.copy(), q0.copy()], last_ee=kin.ee_pose,
                   dt=dt, kin=kin)

    def advance(self, q_new, kin_new: Kinematics):
        self.history = [self.q, self.history[0], self.history[1]]
        self.q = np.asarray(q_new, dtype=float)
        self.last_ee = kin_new.ee_pose
        self.kin = kin_new


# ---------------------------------------------------------------------------
# objective terms


def tracking_objective(q, target: Pose, model: RobotModel, weights: ObjectiveWeights | None = None,
                       kin: Kinematics | None = None):
    """Squared position error plus squared rotation-vector orientation error.

    d/dq of ||log(q_t * q_ee(q)^-1)||^2 reduces to -2 e' J_ang because the
    rotation vector e is a left eigenvector of the inverse right Jacobian of
    the SO(3) log.
    """
    weights = weights or ObjectiveWeights()
    if kin is None:
        kin = Kinematics(model, q)
    e_pos = kin.ee_position - target.position
    e_rot = orientation_error(target.quaternion, kin.ee_pose.quaternion)
    J = kin.jacobian
    value = weights.track_pos * float(e_pos @ e_pos) + weights.track_ori * float(e_rot @ e_rot)
    grad = 2.0 * weights.track_pos * (J[:3].T @ e_pos) - 2.0 * weights.track_ori * (
        J[3:].T @ e_rot
    )
    return value, grad


def smoothness_objective(state: SolverState, q_candidate, model: RobotModel | None = None,
                         weights: ObjectiveWeights | None = None,
                         kin: Kinematics | None = None):
    """Finite-difference velocity/acceleration/jerk regularizers plus the
    Cartesian end-effector velocity term."""
    weights = weights or ObjectiveWeights()
    q_candidate = np.asarray(q_candidate, dtype=float)
    if kin is None:
        kin = Kinematics(model if model is not None else state.kin.model, q_candidate)
    dt = state.dt
    v = (q_candidate - state.q) / dt
    a = (q_candidate - 2.0 * state.q + state.history[0]) / dt**2
    j = (q_candidate - 3.0 * state.q + 3.0 * state.history[0] - state.history[1]) / dt**3
    dx = (kin.ee_position - state.last_ee.position) / dt

    value = (
        weights.vel * float(v @ v)
        + weights.acc * float(a @ a)
        + weights.jerk * float(j @ j)
        + weights.cart_vel * float(dx @ dx)
    )
    grad = (
        2.0 * weights.vel * v / dt
        + 2.0 * weights.acc * a / dt**2
        + 2.0 * weights.jerk * j / dt**3
        + 2.0 * weights.cart_vel * (kin.jacobian[:3].T @ dx) / dt
    )
    return value, grad


def obstacle_arrays(obstacles):
    """Stack obstacle capsules into (p0, p1, radius) arrays once per tick."""
    o0 = np.stack([o.p0 for o in obstacles])
    o1 = np.stack([o.p1 for o in obstacles])
    orad = np.array([o.radius for o in obstacles])
    return o0, o1, orad


def self_collision_objective(q, model: RobotModel, w_selfcol: float | None = None,
                             delta_self: float = 1e-3, kin: Kinematics | None = None):
    """Inverse-quadratic proximity penalty over non-adjacent link pairs."""
    if w_selfcol is None:
        w_selfcol = ObjectiveWeights().selfcol
    if kin is None:
        kin = Kinematics(model, q)
    n = model.n
    idx_a, idx_b = model.self_collision_pair_arrays
    if idx_a.size == 0 or w_selfcol == 0.0:
        return 0.0, np.zeros(n)

    w0, w1 = kin.capsule_endpoints
    links, _, _, radii = model.collider_arrays
    from .collision import segment_closest_points_batch

    s, t, dist = segment_closest_points_batch(w0[idx_a], w1[idx_a], w0[idx_b], w1[idx_b])
    seg_a = w0[idx_a] + s[:, None] * (w1[idx_a] - w0[idx_a])
    seg_b = w0[idx_b] + t[:, None] * (w1[idx_b] - w0[idx_b])
    phi = dist - radii[idx_a] - radii[idx_b]

    value = w_selfcol * float(np.sum(1.0 / (phi**2 + delta_self)))

    coeff = w_selfcol * (-2.0 * phi) / (phi**2 + delta_self) ** 2
    ok = dist > 1e-9
    n_hat = np.zeros_like(seg_a)
    n_hat[ok] = (seg_a[ok] - seg_b[ok]) / dist[ok, None]

    ja = kin.point_jacobians_batch(links[idx_a], seg_a)  # (P, 3, n)
    jb = kin.point_jacobians_batch(links[idx_b], seg_b)
    # d(phi)/dq = n_hat' (J_a - J_b); both witness points ride the robot
    dphi = np.einsum("pi,pij->pj", n_hat, ja - jb)
    grad = (coeff * ok)[:, None] * dphi
    return value, grad.sum(axis=0)


def _penalty_terms(kin: Kinematics, obs, params: PenaltyParams):
    """Value and gradient of the proximity penalty given stacked obstacle
    arrays (hot path shared by the public wrapper and solve_step)."""
    from .collision import segment_closest_points_batch

    model = kin.model
    n = model.n
    o0, o1, orad = obs
    w0, w1 = kin.capsule_endpoints
    links, _, _, radii = model.collider_arrays
    L, O = len(links), len(orad)

    a0 = np.broadcast_to(w0[:, None, :], (L, O, 3))
    a1 = np.broadcast_to(w1[:, None, :], (L, O, 3))
    b0 = np.broadcast_to(o0[None, :, :], (L, O, 3))
    b1 = np.broadcast_to(o1[None, :, :], (L, O, 3))
    s, t, dist = segment_closest_points_batch(a0, a1, b0, b1)
    seg_a = a0 + s[..., None] * (a1 - a0)
    seg_b = b0 + t[..., None] * (b1 - b0)
    phi = dist - radii[:, None] - orad[None, :]

    w_safe = params.w_safe
    value = params.w_col * w_safe * float(np.sum(1.0 / (phi**2 + params.delta)))

    coeff = params.w_col * w_safe * (-2.0 * phi) / (phi**2 + params.delta) ** 2
    ok = dist > 1e-9
    n_hat = np.zeros_like(seg_a)
    n_hat[ok] = (seg_a[ok] - seg_b[ok]) / dist[ok][:, None]

    flat_links = np.repeat(links, O)
    jp = kin.point_jacobians_batch(flat_links, seg_a.reshape(L * O, 3)).reshape(L, O, 3, n)
    dphi = np.einsum("loi,loij->loj", n_hat, jp)
    grad = ((coeff * ok)[..., None] * dphi).sum(axis=(0, 1))
    return value, grad


def penalty_objective(q, obstacles, model: RobotModel, params: PenaltyParams | None = None,
                      kin: Kinematics | None = None):
    """Soft collision cost of the penalty solver: w_col * sum over all
    link-obstacle pairs of w_safe / (phi^2 + delta)."""
    params = params or PenaltyParams()
    if kin is None:
        kin = Kinematics(model, q)
    if not obstacles or params.w_col == 0.0:
        return 0.0, np.zeros(model.n)
    return _penalty_terms(kin, obstacle_arrays(obstacles), params)


# ---------------------------------------------------------------------------
# constraints


def _softmax_pair(t1, t2, tau):
    m = max(t1, t2)
    e1 = np.exp((t1 - m) / tau)
    e2 = np.exp((t2 - m) / tau)
    z = e1 + e2
    return m + tau * np.log(z), e1 / z, e2 / z


def manipulability_constraint(q, model: RobotModel, params: ManipulabilityParams | None = None,
                              kin: Kinematics | None = None):
    """Smoothed max of (sigma floor violation, condition cap violation).

    c <= 0 is feasible. Because softmax >= max, either sub-term binding
    implies c > 0. Gradient by first-order SVD perturbation
    d(sigma) = u' dJ v; if sigma_min collapses below 1e-12 the gradient
    falls back to central finite differences for this evaluation.
    """
    params = params or ManipulabilityParams()
    q = np.asarray(q, dtype=float)
    if kin is None:
        kin = Kinematics(model, q)
    J = kin.jacobian
    # economy SVD keeps Vt rows paired with the singular values (J is 6 x n)
    U, S, Vt = np.linalg.svd(J, full_matrices=False)
    s_max = float(S[0])
    s_min = float(S[-1])
    tau = params.softmax_temperature

    if s_min < 1e-12:
        def value_only(qq):
            s = np.linalg.svd(Kinematics(model, qq).jacobian, compute_uv=False)
            t1 = params.sigma_min_threshold - float(s[-1])
            t2 = float(s[0]) / max(float(s[-1]), 1e-12) - params.condition_number_cap
            return _softmax_pair(t1, t2, tau)[0]

        c = value_only(q)
        grad = np.zeros(model.n)
        h = 1e-7
        for k in range(model.n):
            e = np.zeros(model.n)
            e[k] = h
            grad[k] = (value_only(q + e) - value_only(q - e)) / (2.0 * h)
        return c, grad

    t1 = params.sigma_min_threshold - s_min
    t2 = s_max / s_min - params.condition_number_cap
    c, w1, w2 = _softmax_pair(t1, t2, tau)

    dJ = kin.jacobian_derivative()  # (n, 6, n)
    u_max, v_max = U[:, 0], Vt[0]
    u_min, v_min = U[:, -1], Vt[-1]
    ds_max = np.einsum("i,kij,j->k", u_max, dJ, v_max)
    ds_min = np.einsum("i,kij,j->k", u_min, dJ, v_min)
    dt1 = -ds_min
    dt2 = (ds_max * s_min - s_max * ds_min) / s_min**2
    return c, w1 * dt1 + w2 * dt2


def class_k(h, params: CbfParams):
    """Extended class-K rate limit K(h) = gamma*h + beta*h^3."""
    return params.gamma * h + params.beta * h**3


@dataclass
class CbfTickData:
    """Per-tick barrier data, linearized at the previous configuration.

    term_o(q) = -grad_h_o . (q - q_prev) - K(h_o); the aggregate constraint
    is the temperature-scaled log-sum-exp over obstacles.
    """

    q_prev: np.ndarray
    h: np.ndarray            # (O,)
    grads: np.ndarray        # (O, n)
    k_of_h: np.ndarray       # (O,)
    degenerate: np.ndarray   # (O,) bool


def prepare_cbf_data(state: SolverState, obstacles, model: RobotModel,
                     params: CbfParams, kin_prev: Kinematics | None = None) -> CbfTickData:
    from .collision import distance_gradient

    if kin_prev is None:
        kin_prev = state.kin or Kinematics(model, state.q)
    _, per_obstacle = min_robot_obstacle_distance(kin_prev.world_capsules, obstacles)
    n_obs = len(per_obstacle)
    h = np.empty(n_obs)
    grads = np.empty((n_obs, model.n))
    degenerate = np.zeros(n_obs, dtype=bool)
    for o, w in enumerate(per_obstacle):
        h[o] = w.phi - params.epsilon
        grads[o] = distance_gradient(model, state.q, obstacles[o], w, kin=kin_prev)
        degenerate[o] = w.degenerate
    return CbfTickData(
        q_prev=state.q.copy(),
        h=h,
        grads=grads,
        k_of_h=class_k(h, params),
        degenerate=degenerate,
    )


def cbf_terms(data: CbfTickData, q_candidate):
    dq = np.asarray(q_candidate, dtype=float) - data.q_prev
    return -(data.grads @ dq) - data.k_of_h


def cbf_constraint_from_data(data: CbfTickData, q_candidate, params: CbfParams):
    """log-sum-exp aggregate and its gradient w.r.t. the candidate."""
    T = params.temperature
    terms = cbf_terms(data, q_candidate)
    m = float(np.max(terms))
    w = np.exp(T * (terms - m))
    z = float(np.sum(w))
    c = m + np.log(z) / T
    grad = -(w / z) @ data.grads
    return float(c), grad


def cbf_constraint(q_candidate, state: SolverState, obstacles, model: RobotModel,
                   params: CbfParams | None = None):
    """Aggregated discrete barrier constraint c_CBF(q_candidate) <= 0.

    h and its gradients are evaluated at the previous configuration held by
    `state`, so the constraint is a smooth convex (log-sum-exp of affine)
    function of the candidate.
    """
    params = params or CbfParams()
    if not obstacles:
        raise ValueError("cbf_constraint undefined without obstacles (constraint absent)")
    data = prepare_cbf_data(state, obstacles, model, params)
    return cbf_constraint_from_data(data, q_candidate, params)


# ---------------------------------------------------------------------------
# per-tick solve


@dataclass
class StepDiagnostics:
    status: str
    iterations: int
    kkt_residual: float
    max_constraint_violation: float
    phi_min: float | None          # recomputed at q_next against this tick's obstacles
    solve_time: float
    accepted: bool                 # converged with recomputed violation within tolerance
    held: bool = False             # safe fallback engaged (q_next == previous q)
    alpha: float | None = None     # arbitration weight used by the caller, if any


def solve_step(kind: str, state: SolverState, target: Pose, obstacles, model: RobotModel,
               params: IkParams | None = None, alpha: float | None = None,
               timer=time.perf_counter):
    """One control tick of the selected solver; mutates `state` and returns
    (q_next, StepDiagnostics). Infeasible solves hold the previous
    configuration (the safe fallback) and flag it."""
    if kind not in SOLVER_KINDS:
        raise ValueError(f"unknown solver kind {kind!r}")
    params = params or IkParams()
    weights = params.weights
    n = model.n

    kin_prev = state.kin or Kinematics(model, state.q)
    cbf_data = None
    if kind == KIND_BARRIER and obstacles:
        cbf_data = prepare_cbf_data(state, obstacles, model, params.cbf, kin_prev)

    use_penalty = kind == KIND_PENALTY and bool(obstacles)
    obs = obstacle_arrays(obstacles) if use_penalty else None

    # objective and constraints share one FK evaluation per candidate
    kin_cache: dict = {}

    def kin_at(x):
        key = x.tobytes()
        hit = kin_cache.get(key)
        if hit is None:
            if len(kin_cache) > 16:
                kin_cache.clear()
            hit = Kinematics(model, np.array(x, dtype=float))
            kin_cache[key] = hit
        return hit

    def objective(x):
        kin = kin_at(x)
        v, g = tracking_objective(x, target, model, weights, kin=kin)
        v2, g2 = smoothness_objective(state, x, model, weights, kin=kin)
        v3, g3 = self_collision_objective(x, model, weights.selfcol, params.selfcol_delta,
                                          kin=kin)
        value = v + v2 + v3
        grad = g + g2 + g3
        if use_penalty:
            v4, g4 = _penalty_terms(kin, obs, params.penalty)
            value += v4
            grad += g4
        return value, grad

    inequalities = [
        lambda x: manipulability_constraint(x, model, params.manip, kin=kin_at(x))
    ]
    if cbf_data is not None:
        inequalities.append(lambda x: cbf_constraint_from_data(cbf_data, x, params.cbf))

    lo = model.limits_lower
    hi = model.limits_upper
    if params.step_cap is not None:
        lo = np.maximum(lo, state.q - params.step_cap)
        hi = np.minimum(hi, state.q + params.step_cap)
    problem = NlpProblem(
        dim=n,
        objective=objective,
        inequalities=inequalities,
        lower=lo,
        upper=hi,
    )

    # Gauss-Newton seed from the tracking and smoothness curvature at the
    # warm start; the dominant terms are near-quadratic, so the first QP
    # step is already close to the per-tick optimum.
    J = kin_prev.jacobian
    dt = state.dt
    gn = 2.0 * (
        weights.track_pos * (J[:3].T @ J[:3])
        + weights.track_ori * (J[3:].T @ J[3:])
        + weights.cart_vel * (J[:3].T @ J[:3]) / dt**2
    )
    gn += 2.0 * (weights.vel / dt**2 + weights.acc / dt**4 + weights.jerk / dt**6 + 1e-9) * np.eye(n)

    t0 = timer()
    result = SqpSolver(params.sqp).minimize(problem, state.q, initial_hessian=gn)
    elapsed = timer() - t0

    held = result.status in (STATUS_INFEASIBLE_QP, STATUS_NONFINITE)
    q_next = state.q.copy() if held else result.x_star
    kin_next = kin_prev if held and np.array_equal(q_next, state.q) else Kinematics(model, q_next)

    phi_min = None
    if obstacles:
        global_witness, _ = min_robot_obstacle_distance(kin_next.world_capsules, obstacles)
        phi_min = global_witness.phi

    accepted = (
        not held
        and result.status == STATUS_CONVERGED
        and result.max_constraint_violation <= params.sqp.constraint_tolerance
    )

    state.advance(q_next, kin_next)
    return q_next, StepDiagnostics(
        status="held" if held else result.status,
        iterations=result.iterations,
        kkt_residual=result.kkt_residual,
        max_constraint_violation=result.max_constraint_violation,
        phi_min=phi_min,
        solve_time=elapsed,
        accepted=accepted,
        held=held,
        alpha=alpha,
    )
