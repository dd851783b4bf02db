"""Metric computation and multi-seed solver comparison tables.

Collision counting follows episode semantics: one collision is one
contiguous run of ticks with the global minimum clearance below zero
(robust to tick rate); violation time is the percentage of penetrating
ticks. Jerks are time-averaged magnitudes of third-order finite differences
of end-effector position and of the joint vector.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .ik import IkParams
from .robot import RobotModel
from .rollout import RolloutLog, run_rollout
from .scenes import ReferenceTrajectory, make_scene
from .se3 import quat_angle

METRIC_FIELDS = (
    "collisions", "min_clearance", "violation_time_pct",
    "pos_err_mean", "ori_err_mean", "task_jerk", "joint_jerk",
)


@dataclass
class MetricsReport:
    collisions: float
    min_clearance: float
    violation_time_pct: float
    pos_err_mean: float
    ori_err_mean: float        # degrees
    task_jerk: float | None    # m/s^3; None when the log is too short
    joint_jerk: float | None   # rad/s^3


def count_episodes(phi_min):
    """Distinct penetration episodes: entries into phi < 0 (an initial
    negative tick counts as an entry)."""
    below = np.asarray(phi_min) < 0.0
    if below.size == 0:
        return 0
    entries = int(below[0]) + int(np.sum(below[1:] & ~below[:-1]))
    return entries


def _mean_jerk(series, dt):
    if len(series) < 4:
        return None
    third = np.diff(series, n=3, axis=0) / dt**3
    return float(np.mean(np.linalg.norm(third, axis=-1)))


def compute_metrics(log: RolloutLog, reference: ReferenceTrajectory) -> MetricsReport:
    if log.ticks == 0:
        raise ValueError("empty rollout log")
    finite = np.isfinite(log.phi_min)
    phi = log.phi_min[finite]
    if phi.size:
        collisions = count_episodes(phi)
        min_clearance = float(np.min(phi))
        violation = 100.0 * float(np.sum(phi < 0.0)) / log.ticks
    else:
        collisions = 0
        min_clearance = np.inf
        violation = 0.0

    pos_err = np.zeros(log.ticks)
    ori_err = np.zeros(log.ticks)
    for i in range(log.ticks):
        ref = reference.pose_at(float(log.t[i]))
        pos_err[i] = np.linalg.norm(log.ee_pos[i] - ref.position)
        ori_err[i] = quat_angle(ref.quaternion, log.ee_quat[i])

    return MetricsReport(
        collisions=float(collisions),
        min_clearance=min_clearance,
        violation_time_pct=violation,
        pos_err_mean=float(np.mean(pos_err)),
        ori_err_mean=float(np.degrees(np.mean(ori_err))),
        task_jerk=_mean_jerk(log.ee_pos, log.dt),
        joint_jerk=_mean_jerk(log.q, log.dt),
    )


@dataclass
class ComparisonRow:
    kind: str
    mean: MetricsReport
    sd: MetricsReport
    n_seeds: int


def _aggregate(reports):
    def stat(name, reducer):
        vals = [getattr(r, name) for r in reports]
        if any(v is None for v in vals):
            return None
        if len(vals) == 1 and reducer is _sd:
            return 0.0
        return float(reducer(vals))

    def _mean(v):
        return np.mean(v)

    def _sd(v):
        return np.std(v, ddof=1) if len(v) > 1 else 0.0

    mean = MetricsReport(**{f: stat(f, _mean) for f in METRIC_FIELDS})
    sd = MetricsReport(**{f: stat(f, _sd) for f in METRIC_FIELDS})
    return mean, sd


def batch_compare(kinds, scene_kind: str, n_seeds: int, model: RobotModel,
                  params: IkParams | None = None, dt: float = 1.0 / 90.0,
                  seeds=None, q0=None, duration: float | None = None):
    """Run every solver kind over the seed list and aggregate mean +/- sd of
    each metric. Deterministic: a fixed seed list yields byte-identical CSV."""
    if seeds is None:
        if n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        seeds = list(range(n_seeds))
    rows = []
    per_run = []
    for kind in kinds:
        reports = []
        for seed in seeds:
            scene, traj = make_scene(scene_kind, seed)
            log = run_rollout(kind, scene, traj, dt, model, params, q0=q0,
                              duration=duration)
            report = compute_metrics(log, traj)
            reports.append(report)
            per_run.append((kind, seed, report))
        mean, sd = _aggregate(reports)
        rows.append(ComparisonRow(kind=kind, mean=mean, sd=sd, n_seeds=len(seeds)))
    return rows, per_run


def _fmt(value, digits=4):
    if value is None:
        return "n/a"
    return f"{value:.{digits}f}"


def comparison_table(rows) -> str:
    """Terminal table mirroring the seven-metric comparison layout."""
    headers = (
        "solver", "#collisions", "min clearance [m]", "violation time [%]",
        "pos err [m]", "ori err [deg]", "task jerk [m/s^3]", "joint jerk [rad/s^3]",
    )
    out = io.StringIO()
    cells = [headers]
    for row in rows:
        cells.append(
            (
                row.kind,
                f"{_fmt(row.mean.collisions, 2)} ± {_fmt(row.sd.collisions, 2)}",
                f"{_fmt(row.mean.min_clearance)} ± {_fmt(row.sd.min_clearance)}",
                f"{_fmt(row.mean.violation_time_pct, 2)} ± {_fmt(row.sd.violation_time_pct, 2)}",
                f"{_fmt(row.mean.pos_err_mean)} ± {_fmt(row.sd.pos_err_mean)}",
                f"{_fmt(row.mean.ori_err_mean, 2)} ± {_fmt(row.sd.ori_err_mean, 2)}",
                f"{_fmt(row.mean.task_jerk, 2)} ± {_fmt(row.sd.task_jerk, 2)}",
                f"{_fmt(row.mean.joint_jerk, 2)} ± {_fmt(row.sd.joint_jerk, 2)}",
            )
        )
    widths = [max(len(r[c]) for r in cells) for c in range(len(headers))]
    for r, row_cells in enumerate(cells):
        out.write("  ".join(c.ljust(w) for c, w in zip(row_cells, widths)).rstrip() + "\n")
        if r == 0:
            out.write("  ".join("-" * w for w in widths) + "\n")
    return out.getvalue()


def summary_csv(rows, per_run) -> str:
    """Deterministic summary CSV: one row per (kind, seed) plus mean/sd rows.
    No timing columns (those are the only non-deterministic quantities)."""
    out = io.StringIO()
    out.write("kind,seed," + ",".join(METRIC_FIELDS) + "\n")

    def emit(kind, seed, report):
        vals = []
        for f in METRIC_FIELDS:
            v = getattr(report, f)
            vals.append("" if v is None else repr(float(v)))
        out.write(f"{kind},{seed}," + ",".join(vals) + "\n")

    for kind, seed, report in per_run:
        emit(kind, str(seed), report)
    for row in rows:
        emit(row.kind, "mean", row.mean)
        emit(row.kind, "sd", row.sd)
    return out.getvalue()
