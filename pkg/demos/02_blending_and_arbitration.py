"""Shared-autonomy arbitration and SE(3) blending.

Shows how the sigmoid arbitration weight responds to operator/autonomy
disagreement and how poses blend (linear position, SLERP orientation with
the antipodal sign fix).
"""

import numpy as np

from safeik import ArbitrationParams, BlendInput, Pose, arbitration_weight, blend_pose
from safeik.se3 import quat_from_axis_angle

params = ArbitrationParams(p=-4.0, s=0.2, b=0.0)  # autonomy fades as disagreement grows
print("arbitration weight vs position disagreement (p=-4, s=0.2 m, b=0):")
for d in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8):
    a = arbitration_weight([d, 0, 0], [0, 0, 0], params)
    bar = "#" * int(round(40 * a))
    print(f"  d={d:4.2f} m  alpha={a:6.4f}  {bar}")

print("\nwith p > 0 the same formula gives the opposite direction:")
inc = ArbitrationParams(p=4.0, s=0.2, b=0.0)
for d in (0.0, 0.2, 0.8):
    print(f"  d={d:4.2f} m  alpha={arbitration_weight([d, 0, 0], [0, 0, 0], inc):6.4f}")

# -- blending ------------------------------------------------------------------
human = Pose([0.0, 0.0, 0.0], quat_from_axis_angle([0, 0, 1], 0.0))
robot = Pose([0.4, 0.0, 0.0], quat_from_axis_angle([0, 0, 1], np.pi / 2))
print("\nblend from operator pose to a reference rotated 90 deg about z:")
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    out = blend_pose(BlendInput(human, robot), alpha)
    ang = 2 * np.arccos(np.clip(abs(out.quaternion[0]), -1, 1))
    print(f"  alpha={alpha:4.2f}  pos={np.round(out.position, 3)}  angle={np.degrees(ang):5.1f} deg")

# antipodal representations of the same rotation blend identically
robot_neg = Pose(robot.position, -robot.quaternion)
a = blend_pose(BlendInput(human, robot), 0.3).quaternion
b = blend_pose(BlendInput(human, robot_neg), 0.3).quaternion
print(f"\nantipodal sign fix: identical blends from q and -q -> {np.allclose(a, b)}")
