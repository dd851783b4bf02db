"""Deterministic teleoperation replay without a browser.

Drives the live-session state machine with a scripted operator: a target
drag straight through a clutter post, once with the barrier solver and once
with the nominal one. The same script against a live server is what the
browser client does interactively.
"""

import numpy as np

import safeik
from safeik.config import RunConfig, TeleopConfig
from safeik.teleop import TeleopSession

model = safeik.load_bundled_robot()


def drag_session(kind):
    cfg = RunConfig(
        scene="clutter", seeds=(0,), solver_kind=kind,
        teleop=TeleopConfig(deterministic_timing=True),
    )
    session = TeleopSession(model, cfg)
    # pure teleop: the operator owns the target
    session.handle_message({"v": 1, "type": "set_alpha",
                            "payload": {"mode": "fixed", "value": 0.0}})
    post = session.scene.obstacles[1][0]
    center = 0.5 * (post.p0 + post.p1)
    start = center + np.array([-0.16, 0.0, 0.05])
    end = center + np.array([0.16, 0.0, 0.05])
    frame = None
    worst = np.inf
    for k in range(420):
        s = min(1.0, k / 240.0)
        pos = (1 - s) * start + s * end
        session.handle_message({"v": 1, "type": "target",
                                "payload": {"pos": list(pos), "quat": [1, 0, 0, 0]}})
        frame = session.tick()
        if frame["phi_min"] is not None:
            worst = min(worst, frame["phi_min"])
    return frame["episodes"], worst


print("dragging the target straight through a post (pure teleop, alpha=0):\n")
for kind in ("B", "N"):
    episodes, worst = drag_session(kind)
    print(f"  solver {kind}: collision episodes = {episodes}, "
          f"worst clearance = {worst:+.4f} m")

print("\nThe barrier session absorbs the unsafe command; the nominal one")
print("follows it through the obstacle.")
print("\nLive version:  safeik serve --config src/safeik/data/clutter.yaml")
print("then open frontend/dist/index.html (see frontend/README.md).")
