"""Rollout execution and per-tick logging.

A rollout advances the scene clock, samples the reference (optionally
blending a scripted operator stream), runs one solve per tick, and records
everything needed to recompute every metric offline. Clearances in the log
are recomputed from the logged configuration through the collision module,
never copied from solver internals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blending import ArbitrationParams, BlendInput, arbitration_weight, blend_pose
from .collision import min_robot_obstacle_distance
from .ik import IkParams, SolverState, solve_step
from .robot import RobotModel
from .scenes import HOME_Q, ReferenceTrajectory, Scene, obstacle_poses_at

# per-tick CSV column order (stable; consumed by the UI's offline viewer).
# step_ms is last and is the only non-deterministic column.
TICK_COLUMNS = (
    "tick", "t", "q[n]", "ee_pos[3]", "ee_quat[4]", "target_pos[3]",
    "target_quat[4]", "phi_min", "phi[per_obstacle]", "alpha", "status",
    "accepted", "step_ms",
)


@dataclass
class RolloutLog:
    kind: str
    scene_name: str
    seed: int
    dt: float
    t: np.ndarray
    q: np.ndarray              # (ticks, n)
    ee_pos: np.ndarray         # (ticks, 3)
    ee_quat: np.ndarray        # (ticks, 4)
    target_pos: np.ndarray
    target_quat: np.ndarray
    phi_min: np.ndarray        # (ticks,) inf when the scene has no obstacles
    phi: np.ndarray            # (ticks, n_obstacles)
    alpha: np.ndarray
    status: list
    accepted: np.ndarray       # bool per tick
    step_ms: np.ndarray
    truncated: bool = False

    @property
    def ticks(self):
        return len(self.t)

    def write_csv(self, path):
        n = self.q.shape[1]
        n_obs = self.phi.shape[1]
        header = (
            ["tick", "t"]
            + [f"q{i}" for i in range(n)]
            + ["ee_x", "ee_y", "ee_z", "ee_qw", "ee_qx", "ee_qy", "ee_qz"]
            + ["tgt_x", "tgt_y", "tgt_z", "tgt_qw", "tgt_qx", "tgt_qy", "tgt_qz"]
            + ["phi_min"]
            + [f"phi{o}" for o in range(n_obs)]
            + ["alpha", "status", "accepted", "step_ms"]
        )
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(self.ticks):
                row = (
                    [str(i), repr(float(self.t[i]))]
                    + [repr(float(v)) for v in self.q[i]]
                    + [repr(float(v)) for v in self.ee_pos[i]]
                    + [repr(float(v)) for v in self.ee_quat[i]]
                    + [repr(float(v)) for v in self.target_pos[i]]
                    + [repr(float(v)) for v in self.target_quat[i]]
                    + [repr(float(self.phi_min[i]))]
                    + [repr(float(v)) for v in self.phi[i]]
                    + [repr(float(self.alpha[i])), self.status[i],
                       str(int(self.accepted[i])), repr(float(self.step_ms[i]))]
                )
                fh.write(",".join(row) + "\n")


def run_rollout(kind: str, scene: Scene, traj: ReferenceTrajectory, dt: float,
                model: RobotModel, params: IkParams | None = None,
                q0=None, duration: float | None = None,
                human_stream=None, arbitration: ArbitrationParams | None = None,
                timer=time.perf_counter) -> RolloutLog:
    """Track the reference through the scene with one solver kind.

    Autonomous mode (default): the target is the reference pose, no
    blending, alpha logged as 1. Replay mode: human_stream(t) supplies the
    operator pose; the target is the arbitration blend of the two.
    Deterministic given (kind, scene, traj, dt, params, q0, streams).
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    params = params or IkParams()
    q0 = np.asarray(q0 if q0 is not None else HOME_Q, dtype=float)
    duration = duration if duration is not None else traj.duration
    ticks = int(round(duration / dt))
    n_obs = len(scene.obstacles)

    state = SolverState.initial(model, q0, dt)
    log = RolloutLog(
        kind=kind,
        scene_name=scene.name,
        seed=scene.seed,
        dt=dt,
        t=np.zeros(ticks),
        q=np.zeros((ticks, model.n)),
        ee_pos=np.zeros((ticks, 3)),
        ee_quat=np.zeros((ticks, 4)),
        target_pos=np.zeros((ticks, 3)),
        target_quat=np.zeros((ticks, 4)),
        phi_min=np.full(ticks, np.inf),
        phi=np.full((ticks, n_obs), np.inf),
        alpha=np.ones(ticks),
        status=[""] * ticks,
        accepted=np.zeros(ticks, dtype=bool),
        step_ms=np.zeros(ticks),
    )

    for i in range(ticks):
        t = i * dt
        obstacles = obstacle_poses_at(scene, t)
        reference = traj.pose_at(t)
        if human_stream is not None:
            human = human_stream(t)
            arb = arbitration or ArbitrationParams()
            alpha = arbitration_weight(human.position, reference.position, arb)
            target = blend_pose(BlendInput(human, reference), alpha)
        else:
            alpha = 1.0
            target = reference

        try:
            q_next, diag = solve_step(
                kind, state, target, obstacles, model, params, alpha=alpha, timer=timer
            )
        except Exception:
            # solver panic: truncate the log, never fail silently
            log.truncated = True
            for name in ("t", "q", "ee_pos", "ee_quat", "target_pos", "target_quat",
                         "phi_min", "phi", "alpha", "accepted", "step_ms"):
                setattr(log, name, getattr(log, name)[:i])
            log.status = log.status[:i]
            raise

        kin = state.kin  # kinematics at q_next (advanced by solve_step)
        log.t[i] = t
        log.q[i] = q_next
        log.ee_pos[i] = kin.ee_position
        log.ee_quat[i] = kin.ee_pose.quaternion
        log.target_pos[i] = target.position
        log.target_quat[i] = target.quaternion
        log.alpha[i] = alpha
        log.status[i] = diag.status
        log.accepted[i] = diag.accepted
        log.step_ms[i] = diag.solve_time * 1e3
        if obstacles:
            # evaluation independence: recompute from the logged q
            global_w, per = min_robot_obstacle_distance(kin.world_capsules, obstacles)
            log.phi_min[i] = global_w.phi
            log.phi[i] = [w.phi for w in per]

    return log
