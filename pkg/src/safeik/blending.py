"""Shared-autonomy arbitration and SE(3) pose blending.

The arbitration weight alpha mixes the operator pose with the autonomy
reference: positions blend linearly, orientations by SLERP after forcing a
positive quaternion dot product so antipodal representations of the same
rotation cannot cause a discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .se3 import Pose, slerp


@dataclass(frozen=True)
class ArbitrationParams:
    """Sigmoid arbitration alpha = sigmoid(p * (d/s + b)) over the position
    disagreement d, or a fixed alpha.

    The printed form is kept verbatim: the sign of the slope p selects
    whether alpha grows or shrinks with disagreement (p < 0 fades autonomy
    out as the operator diverges from the reference).
    """

    p: float = -4.0
    s: float = 0.2  # meters
    b: float = 0.0
    mode: str = "sigmoid"  # "sigmoid" | "fixed"
    fixed_alpha: float = 1.0

    def __post_init__(self):
        if self.s <= 0.0:
            raise ValueError("arbitration scale s must be > 0")
        if not 0.0 <= self.fixed_alpha <= 1.0:
            raise ValueError("fixed_alpha must lie in [0, 1]")
        if self.mode not in ("sigmoid", "fixed"):
            raise ValueError(f"unknown arbitration mode {self.mode!r}")


@dataclass(frozen=True)
class BlendInput:
    human: Pose
    reference: Pose


def sigmoid(x):
    # split by sign to avoid overflow in exp
    if x >= 0.0:
        z = np.exp(-x)
        return 1.0 / (1.0 + z)
    z = np.exp(x)
    return z / (1.0 + z)


def arbitration_weight(x_h, x_r, params: ArbitrationParams) -> float:
    """Arbitration coefficient in [0, 1] from position disagreement."""
    if params.mode == "fixed":
        return params.fixed_alpha
    d = float(np.linalg.norm(np.asarray(x_h, dtype=float) - np.asarray(x_r, dtype=float)))
    return float(sigmoid(params.p * (d / params.s + params.b)))


def blend_pose(inputs: BlendInput, alpha: float) -> Pose:
    """Blend human and reference poses: linear in position, SLERP in
    orientation with the antipodal sign fix."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    x = (1.0 - alpha) * inputs.human.position + alpha * inputs.reference.position
    q_h = inputs.human.quaternion
    q_r = inputs.reference.quaternion
    if float(np.dot(q_h, q_r)) < 0.0:
        q_r = -q_r
    return Pose(x, slerp(q_h, q_r, alpha))
