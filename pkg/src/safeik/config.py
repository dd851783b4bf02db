"""Run configuration: a declarative YAML file naming the robot, scene,
solver parameters, seeds, and teleop settings. Every field has a default;
files override selectively. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .blending import ArbitrationParams
from .ik import CbfParams, IkParams, ManipulabilityParams, ObjectiveWeights, PenaltyParams
from .robot import RobotModel, load_robot
from .scenes import HOME_Q
from .sqp import SolveOptions


@dataclass(frozen=True)
class TeleopConfig:
    port: int = 8765
    rate_hz: float = 90.0
    stale_hold_s: float = 0.5
    policy: str = "nearest_pick"  # nearest_pick | fixed | waypoints
    deterministic_timing: bool = False  # zero step_ms for golden replays


@dataclass(frozen=True)
class RunConfig:
    robot: str = "builtin:arm7"
    scene: str = "dynamic"
    dt: float = 1.0 / 90.0
    duration: float | None = None
    q_home: tuple = tuple(HOME_Q)
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    solver_kind: str = "B"
    ik: IkParams = field(default_factory=IkParams)
    arbitration: ArbitrationParams = field(default_factory=ArbitrationParams)
    teleop: TeleopConfig = field(default_factory=TeleopConfig)

    def load_model(self, base_dir: Path | None = None) -> RobotModel:
        if self.robot.startswith("builtin:"):
            from . import bundled_robot_text

            return load_robot(bundled_robot_text(self.robot.split(":", 1)[1]))
        path = Path(self.robot)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_robot(path.read_text())

    @property
    def home(self):
        return np.asarray(self.q_home, dtype=float)


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def _build_ik(data):
    if data is None:
        return IkParams(), None
    data = dict(data)
    kind = data.pop("kind", None)
    parts = {
        "weights": _build(ObjectiveWeights, data.pop("weights", None), "solver.weights"),
        "cbf": _build(CbfParams, data.pop("cbf", None), "solver.cbf"),
        "penalty": _build(PenaltyParams, data.pop("penalty", None), "solver.penalty"),
        "manip": _build(
            ManipulabilityParams, data.pop("manipulability", None), "solver.manipulability"
        ),
        "sqp": _build(SolveOptions, data.pop("sqp", None), "solver.sqp"),
    }
    for simple in ("selfcol_delta", "step_cap"):
        if simple in data:
            parts[simple] = data.pop(simple)
    if data:
        raise ValueError(f"solver: unknown keys {sorted(data)}")
    defaults = IkParams()
    if "sqp" not in parts or parts["sqp"] is None:
        parts["sqp"] = defaults.sqp
    return replace(defaults, **parts), kind


def load_run_config(path=None, text=None) -> RunConfig:
    """Load a run config from a YAML file or literal text; defaults apply to
    every omitted field."""
    if text is None and path is None:
        return RunConfig()
    if text is None:
        text = Path(path).read_text()
    doc = yaml.safe_load(text) or {}
    if not isinstance(doc, dict):
        raise ValueError("run config must be a mapping")

    known = {
        "robot", "scene", "dt", "duration", "q_home", "seeds", "solver",
        "arbitration", "teleop",
    }
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"run config: unknown keys {sorted(unknown)}")

    ik, kind = _build_ik(doc.get("solver"))
    cfg = RunConfig(
        robot=doc.get("robot", "builtin:arm7"),
        scene=doc.get("scene", "dynamic"),
        dt=float(doc.get("dt", 1.0 / 90.0)),
        duration=doc.get("duration"),
        q_home=tuple(doc.get("q_home", tuple(HOME_Q))),
        seeds=tuple(doc.get("seeds", tuple(range(10)))),
        solver_kind=kind or "B",
        ik=ik,
        arbitration=_build(ArbitrationParams, doc.get("arbitration"), "arbitration"),
        teleop=_build(TeleopConfig, doc.get("teleop"), "teleop"),
    )
    if cfg.dt <= 0:
        raise ValueError("dt must be > 0")
    return cfg
