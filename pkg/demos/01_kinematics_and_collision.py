"""Tour of the kinematics and collision layers.

Loads the bundled 7-DoF arm, runs forward kinematics and the geometric
Jacobian, cross-checks the Jacobian against finite differences, and probes
capsule signed distances with witness points.
"""

import numpy as np

import safeik
from safeik import Capsule, Kinematics, capsule_signed_distance

model = safeik.load_bundled_robot()
print(f"robot '{model.name}': {model.n} joints, {len(model.colliders)} collision capsules")

# -- forward kinematics ------------------------------------------------------
q_home = np.array([0.0, 0.9, 0.0, -1.4, 0.0, 0.8, 0.0])
frames, ee = safeik.forward_kinematics(model, q_home)
print("\nend effector at the home configuration:")
print("  position ", np.round(ee.position, 4))
print("  quaternion", np.round(ee.quaternion, 4))

# -- geometric Jacobian vs finite differences --------------------------------
J = safeik.geometric_jacobian(model, q_home)
h = 1e-6
worst = 0.0
for k in range(model.n):
    e = np.zeros(model.n)
    e[k] = h
    _, ee_p = safeik.forward_kinematics(model, q_home + e)
    _, ee_m = safeik.forward_kinematics(model, q_home - e)
    fd = (ee_p.position - ee_m.position) / (2 * h)
    worst = max(worst, np.max(np.abs(J[:3, k] - fd)))
print(f"\nJacobian linear rows vs finite differences: max abs error {worst:.2e}")

# -- world-frame collision capsules ------------------------------------------
caps = safeik.link_capsules_world(model, q_home)
print("\nlink capsules at home (world frame):")
for i, cap in enumerate(caps):
    print(f"  cap{i}: {np.round(cap.p0, 3)} -> {np.round(cap.p1, 3)}  r={cap.radius}")

# -- capsule signed distances --------------------------------------------------
post = Capsule([0.35, 0.0, 0.5], [0.35, 0.0, 1.0], 0.04)
witness = min(
    (capsule_signed_distance(c, post, pair=(i, 0)) for i, c in enumerate(caps)),
    key=lambda w: w.phi,
)
print(f"\nvertical post at x=0.35: closest link capsule is #{witness.pair[0]}")
print(f"  signed distance phi = {witness.phi:+.4f} m (negative would mean contact)")
print(f"  witness points {np.round(witness.point_a, 3)} <-> {np.round(witness.point_b, 3)}")

# the same query through the robot-level helper, plus the distance gradient
kin = Kinematics(model, q_home)
from safeik.collision import distance_gradient, min_robot_obstacle_distance

global_w, per = min_robot_obstacle_distance(kin.world_capsules, [post])
grad = distance_gradient(model, q_home, post, global_w, kin=kin)
print("\nconfiguration-space distance gradient (which joints gain clearance):")
print(" ", np.round(grad, 4))
print("moving along +gradient increases clearance; the barrier solver uses this.")
