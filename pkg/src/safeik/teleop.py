"""Live teleoperation service.

A TeleopSession owns the authoritative state and is purely tick-driven:
given the same message script and config, the emitted state stream is
identical across runs (wall time never enters the state; the reported
step_ms is measured solver time and is zeroed in deterministic mode).

serve() wraps a session in a WebSocket endpoint: the first client is the
control client, later ones are observers. Messages are length-delimited
UTF-8 JSON frames in a versioned envelope {"v": 1, "type": ..., "payload":
...}; malformed ones get an error frame and never drop the session.

Stale-input policy: after an operator target arrives, the session keeps
blending with the last target for up to `stale_hold_s`; beyond that the
target freezes at the operator's last pose (autonomy cannot run away on a
dropped connection). Before any operator input the reference policy drives
the arm alone.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass

import numpy as np

from .blending import ArbitrationParams, BlendInput, arbitration_weight, blend_pose
from .collision import min_robot_obstacle_distance
from .config import RunConfig
from .ik import SOLVER_KINDS, SolverState, solve_step
from .robot import RobotModel
from .scenes import make_scene, obstacle_poses_at
from .se3 import Pose

PROTOCOL_VERSION = 1


def _finite_vec(values, length, where):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (length,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{where}: expected {length} finite numbers")
    return arr


def _pose_from_payload(payload):
    pos = _finite_vec(payload.get("pos"), 3, "target.pos")
    quat = _finite_vec(payload.get("quat"), 4, "target.quat")
    norm = np.linalg.norm(quat)
    if norm < 1e-6:
        raise ValueError("target.quat: zero quaternion")
    return Pose(pos, quat / norm)


class ProtocolError(ValueError):
    def __init__(self, code, msg):
        self.code = code
        super().__init__(msg)


@dataclass
class ScriptEvent:
    tick: int
    message: dict


class TeleopSession:
    """Authoritative teleop state machine; exactly one per served session."""

    def __init__(self, model: RobotModel, config: RunConfig | None = None):
        self.model = model
        self.config = config or RunConfig()
        self.dt = 1.0 / self.config.teleop.rate_hz
        self.params = self.config.ik
        self.kind = self.config.solver_kind
        self.arbitration = self.config.arbitration
        self.stale_ticks = max(1, int(round(self.config.teleop.stale_hold_s / self.dt)))
        self.deterministic = self.config.teleop.deterministic_timing
        self.tick_index = 0
        self.paused = False
        self.last_human = None       # (Pose, tick received)
        self.last_payload = None
        self.set_scene(self.config.scene, int(self.config.seeds[0]) if self.config.seeds else 0)

    # -- state management ---------------------------------------------------

    def set_scene(self, kind: str, seed: int):
        self.scene, self.traj = make_scene(kind, seed)
        self.state = SolverState.initial(self.model, self.config.home, self.dt)
        self.episodes = 0
        self._was_below = False
        self._home_ee = self.state.last_ee

    def reference_pose(self, t: float) -> Pose:
        policy = self.config.teleop.policy
        if policy == "fixed":
            return self._home_ee
        if policy == "nearest_pick" and self.scene.pick_poses:
            ee = self.state.last_ee.position
            dists = [np.linalg.norm(p.position - ee) for p in self.scene.pick_poses]
            return self.scene.pick_poses[int(np.argmin(dists))]
        return self.traj.pose_at(t)

    # -- protocol -----------------------------------------------------------

    def handle_message(self, msg: dict):
        """Apply one already-parsed client message; raises ProtocolError on
        malformed content (session state is untouched in that case)."""
        if not isinstance(msg, dict):
            raise ProtocolError("bad_envelope", "message must be an object")
        if msg.get("v") != PROTOCOL_VERSION:
            raise ProtocolError("bad_version", f"expected protocol v{PROTOCOL_VERSION}")
        mtype = msg.get("type")
        payload = msg.get("payload") or {}
        if mtype == "target":
            try:
                self.last_human = (_pose_from_payload(payload), self.tick_index)
            except ValueError as exc:
                raise ProtocolError("bad_payload", str(exc)) from exc
        elif mtype == "set_solver":
            kind = payload.get("kind")
            if kind not in SOLVER_KINDS:
                raise ProtocolError("bad_payload", f"unknown solver kind {kind!r}")
            self.kind = kind
        elif mtype == "set_alpha":
            mode = payload.get("mode")
            if mode not in ("fixed", "sigmoid"):
                raise ProtocolError("bad_payload", f"unknown alpha mode {mode!r}")
            kwargs = {"mode": mode}
            if mode == "fixed":
                kwargs["fixed_alpha"] = float(payload.get("value", 1.0))
            for key in ("p", "s", "b"):
                if key in payload:
                    kwargs[key] = float(payload[key])
            try:
                self.arbitration = ArbitrationParams(
                    **{**self.arbitration.__dict__, **kwargs}
                )
            except ValueError as exc:
                raise ProtocolError("bad_payload", str(exc)) from exc
        elif mtype == "set_scene":
            kind = payload.get("kind")
            try:
                self.set_scene(kind, int(payload.get("seed", 0)))
            except (ValueError, TypeError) as exc:
                raise ProtocolError("bad_payload", str(exc)) from exc
        elif mtype == "pause":
            self.paused = True
        elif mtype == "resume":
            self.paused = False
        else:
            raise ProtocolError("bad_type", f"unknown message type {mtype!r}")

    def apply_raw(self, raw: str):
        """Parse and apply a wire frame; returns an error frame dict instead
        of raising, so the serving loop never drops a session."""
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            return error_frame("bad_json", str(exc))
        try:
            self.handle_message(msg)
        except ProtocolError as exc:
            return error_frame(exc.code, str(exc))
        return None

    # -- simulation ---------------------------------------------------------

    def tick(self, human_target: Pose | None = None) -> dict:
        """Advance one control period and return the state payload."""
        if human_target is not None:
            self.last_human = (human_target, self.tick_index)
        t = self.tick_index * self.dt
        obstacles = obstacle_poses_at(self.scene, t)
        reference = self.reference_pose(t)

        if self.last_human is None:
            alpha = 1.0
            target = reference
        else:
            human, received = self.last_human
            age = self.tick_index - received
            if age <= self.stale_ticks:
                alpha = arbitration_weight(human.position, reference.position,
                                           self.arbitration)
                target = blend_pose(BlendInput(human, reference), alpha)
            else:
                # stale operator input: freeze at the last human pose
                alpha = 0.0
                target = human

        timer = (lambda: 0.0) if self.deterministic else time.perf_counter
        q_next, diag = solve_step(
            self.kind, self.state, target, obstacles, self.model, self.params,
            alpha=alpha, timer=timer,
        )

        kin = self.state.kin
        phi = []
        phi_min = None
        if obstacles:
            _, per = min_robot_obstacle_distance(kin.world_capsules, obstacles)
            phi = [float(w.phi) for w in per]
            phi_min = min(phi)
            below = phi_min < 0.0
            if below and not self._was_below:
                self.episodes += 1
            self._was_below = below

        payload = {
            "tick": self.tick_index,
            "t": t,
            "q": [float(v) for v in q_next],
            "ee": {
                "pos": [float(v) for v in kin.ee_position],
                "quat": [float(v) for v in kin.ee_pose.quaternion],
            },
            "target": {
                "pos": [float(v) for v in target.position],
                "quat": [float(v) for v in target.quaternion],
            },
            "alpha": float(alpha),
            "phi": phi,
            "phi_min": phi_min,
            "solver": self.kind,
            "status": diag.status,
            "episodes": self.episodes,
            "step_ms": 0.0 if self.deterministic else diag.solve_time * 1e3,
            "obstacles": [
                {
                    "p0": [float(v) for v in c.p0],
                    "p1": [float(v) for v in c.p1],
                    "r": float(c.radius),
                }
                for c in obstacles
            ],
        }
        self.tick_index += 1
        self.last_payload = payload
        return payload

    def run_script(self, events, ticks: int):
        """Deterministic replay: apply scripted messages at their step
        boundaries (steps count loop iterations, so pauses do not starve
        later events) and collect every emitted state payload."""
        by_step = {}
        for ev in events:
            ev = ev if isinstance(ev, ScriptEvent) else ScriptEvent(**ev)
            by_step.setdefault(ev.tick, []).append(ev.message)
        frames = []
        for step in range(ticks):
            for msg in by_step.get(step, []):
                self.handle_message(msg)
            if not self.paused:
                frames.append(self.tick())
        return frames


def state_frame(payload):
    return {"v": PROTOCOL_VERSION, "type": "state", "payload": payload}


def error_frame(code, msg):
    return {"v": PROTOCOL_VERSION, "type": "error", "payload": {"code": code, "msg": msg}}


def encode(frame) -> str:
    return json.dumps(frame, separators=(",", ":"), sort_keys=True)


# ---------------------------------------------------------------------------
# WebSocket endpoint


class TeleopServer:
    """One session served over WebSocket: a single control client may mutate,
    any number of observers watch. The session clock only advances while at
    least one client is connected and the session is not paused."""

    def __init__(self, model, config: RunConfig | None = None, host="127.0.0.1", port=None):
        self.session = TeleopSession(model, config)
        self.host = host
        self.port = port if port is not None else self.session.config.teleop.port
        self.actual_port = None
        self._stop = None
        self._loop_ref = None
        self._ready = threading.Event()

    async def _client_handler(self, ws):
        role = "control" if self.control is None else "observer"
        if role == "control":
            self.control = ws
        queue = asyncio.Queue(maxsize=4)
        self.clients[ws] = {"queue": queue, "dropped": 0, "role": role}
        writer = asyncio.create_task(self._writer(ws, queue))
        try:
            async for raw in ws:
                if self.clients[ws]["role"] != "control":
                    await self._offer(ws, encode(error_frame(
                        "observer_forbidden", "only the control client may send messages"
                    )))
                    continue
                self.inbox.append(raw)
        finally:
            writer.cancel()
            self.clients.pop(ws, None)
            if self.control is ws:
                self.control = None

    async def _writer(self, ws, queue):
        try:
            while True:
                frame = await queue.get()
                await ws.send(frame)
        except Exception:
            pass

    async def _offer(self, ws, frame):
        entry = self.clients.get(ws)
        if entry is None:
            return
        try:
            entry["queue"].put_nowait(frame)
            if entry["dropped"]:
                # flag the gap to the lagging client once it drains
                try:
                    entry["queue"].put_nowait(
                        encode(error_frame("frames_dropped", str(entry["dropped"])))
                    )
                    entry["dropped"] = 0
                except asyncio.QueueFull:
                    pass
        except asyncio.QueueFull:
            entry["dropped"] += 1

    async def _loop(self):
        dt = self.session.dt
        loop = asyncio.get_running_loop()
        deadline = loop.time()
        paused_announced = False
        while not self._stop.is_set():
            # apply control messages at the tick boundary, in arrival order
            inbox, self.inbox = self.inbox, []
            for raw in inbox:
                err = self.session.apply_raw(raw)
                if err is not None and self.control is not None:
                    await self._offer(self.control, encode(err))
            if self.clients and not self.session.paused:
                payload = self.session.tick()
                frame = encode(state_frame(payload))
                for ws in list(self.clients):
                    await self._offer(ws, frame)
                paused_announced = False
            elif self.session.paused and not paused_announced \
                    and self.session.last_payload is not None:
                # one frozen frame tagged paused so clients can show the badge
                payload = dict(self.session.last_payload)
                payload["status"] = "paused"
                frame = encode(state_frame(payload))
                for ws in list(self.clients):
                    await self._offer(ws, frame)
                paused_announced = True
            if self.clients:
                deadline += dt
            else:
                deadline = loop.time() + dt  # clock paused without clients
            await asyncio.sleep(max(0.0, deadline - loop.time()))

    async def _main(self):
        import websockets

        self.clients = {}
        self.control = None
        self.inbox = []
        self._stop = asyncio.Event()
        self._loop_ref = asyncio.get_running_loop()
        async with websockets.serve(self._client_handler, self.host, self.port) as server:
            self.actual_port = server.sockets[0].getsockname()[1]
            self._ready.set()
            await self._loop()

    def run(self):
        """Blocking serve (CLI entry)."""
        asyncio.run(self._main())

    def start_background(self):
        """Serve from a daemon thread; returns once the port is bound."""
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=10.0):
            raise RuntimeError("teleop server failed to start")
        return self.actual_port

    def stop(self):
        if self._stop is not None and self._loop_ref is not None:
            # asyncio primitives are not thread-safe; hop onto the loop
            try:
                self._loop_ref.call_soon_threadsafe(self._stop.set)
            except RuntimeError:
                pass  # loop already closed
        if getattr(self, "_thread", None):
            self._thread.join(timeout=5.0)


def serve(config: RunConfig, model=None, host="127.0.0.1", port=None) -> TeleopServer:
    if model is None:
        model = config.load_model()
    return TeleopServer(model, config, host=host, port=port)
