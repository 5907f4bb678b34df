"""Live session host: telemetry frames out, operator events in.

Each session owns one world exclusively; operator events queue up and fold
in only at tick boundaries, so a session driven by a scripted intervention
stream logs exactly what simulator.run logs. The wire protocol is one JSON
object per WebSocket message (the transport frames delimit message length)
with kinds {hello, frame, event, ack, error}, all versioned with "v".
"""

from __future__ import annotations

import itertools
import json
import math
import threading
import time
from dataclasses import dataclass
from typing import Any, Iterator

from websockets.sync.server import serve as ws_serve

from .errors import NavmixError, OutOfBounds, SchemaError, UnknownSession
from .simulator import World, load_scenario
from .trajectory import Pose

PROTOCOL_VERSION = 1

EVENT_KINDS = ("goal_set", "waypoint", "joystick", "pause", "resume", "reset")


@dataclass(frozen=True)
class OperatorEvent:
    """One operator input; joystick magnitudes are clamped on ingest and
    z^h samples are stamped with the sim time at which they fold in."""

    kind: str
    payload: Any = None
    timestamp: float | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


class Session:
    """One live world plus its frame history and event queue."""

    def __init__(self, sid: str, document: dict, pace: str = "realtime"):
        self.sid = sid
        self.document = document
        self.pace = pace
        self.scenario = load_scenario(document)
        self.world = World(self.scenario)
        self.paused = True
        self.epoch = 0
        self._seq = 0
        self._event_seq = 0
        self.frames: list[dict] = []
        self.queue: list[OperatorEvent] = []
        self.cond = threading.Condition()
        self.closed = False
        self._append_frame(self._preview_frame())
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name=f"navmix-session-{sid}")
        self._thread.start()

    # -- frame construction ---------------------------------------------------

    def _append_frame(self, frame: dict) -> None:
        with self.cond:  # Condition wraps an RLock; safe under _loop/submit
            frame["seq"] = self._seq
            self._seq += 1
            self.frames.append(frame)
            self.cond.notify_all()

    def _preview_frame(self) -> dict:
        w = self.world
        visible, dist, report = w.preview()
        plans = list(dist.plans())
        return self._frame_dict(tick=0, time=0.0, visible=visible, dist=dist,
                                report=report, base_id=plans.index)

    def _tick_frame(self) -> dict:
        w = self.world
        return self._frame_dict(tick=w.tick_index, time=w.time, visible=w.last_visible,
                                dist=w.last_dist, report=w.last_report,
                                base_id=w._base_id)

    def _frame_dict(self, tick, time, visible, dist, report, base_id) -> dict:
        w = self.world
        frame = {
            "v": PROTOCOL_VERSION,
            "kind": "frame",
            "session": self.sid,
            "epoch": self.epoch,
            "tick": tick,
            "time": time,
            "robot": {"x": w.robot_pose.x, "y": w.robot_pose.y,
                      "vx": w.robot_velocity[0], "vy": w.robot_velocity[1]},
            "crowd": [{"id": tr.agent_id, "x": tr.last()[1].x, "y": tr.last()[1].y}
                      for tr in visible],
            "components": [{"id": base_id(p), "w": wgt,
                            "points": [[q.x, q.y] for q in p.points]}
                           for wgt, p in dist.components],
            "chosen": base_id(dist.plans()[report.assignment.component_index]),
            "samples": [{"points": [[q.x, q.y] for q in traj.points], "w": wgt}
                        for traj, wgt in report.sample_summary],
            "assistive": w.assistive_mode(),
            "evidence": {
                "goals": [[g.x, g.y] for g in w.goals],
                "waypoints": [[p.x, p.y] for _, p in w.pending_waypoints],
                "joystick": [[t, vx, vy] for t, vx, vy in w.joystick[-20:]],
                "pending_events": len(self.queue),
            },
            "paused": self.paused,
            "done": w.done,
        }
        if w.done:
            frame["summary"] = w.run_log().summary
        return frame

    # -- tick loop --------------------------------------------------------------

    def _loop(self) -> None:
        while True:
            with self.cond:
                while not self.closed and (self.paused or self.world.done):
                    self.cond.wait(timeout=0.5)
                if self.closed:
                    return
                for ev in self.queue:
                    kind = "goal" if ev.kind == "goal_set" else ev.kind
                    self.world.enqueue_event(kind, ev.payload)
                self.queue.clear()
                self.world.step()
                self._append_frame(self._tick_frame())
                dt = self.scenario.cfg.dt
            if self.pace == "realtime":
                time.sleep(dt)

    # -- control ------------------------------------------------------------

    def submit(self, event: OperatorEvent) -> dict:
        grid = self.scenario.grid
        with self.cond:
            if event.kind == "pause":
                self.paused = True
            elif event.kind == "resume":
                self.paused = False
                self.cond.notify_all()
            elif event.kind == "reset":
                self.world = World(self.scenario)
                self.paused = True
                self.epoch += 1
                self.queue.clear()
                self._append_frame(self._preview_frame())
            else:
                self._validate_payload(event, grid)
                self.queue.append(self._clamped(event))
                self.cond.notify_all()
            self._event_seq += 1
            return {"v": PROTOCOL_VERSION, "kind": "ack", "session": self.sid,
                    "event": self._event_seq, "event_kind": event.kind,
                    "applies_tick": self.world.tick_index + 1}

    def _clamped(self, event: OperatorEvent) -> OperatorEvent:
        if event.kind != "joystick":
            return event
        vx, vy = float(event.payload[0]), float(event.payload[1])
        v_max = self.scenario.cfg.models.v_max
        speed = math.hypot(vx, vy)
        if speed > v_max and speed > 0:
            vx, vy = vx * v_max / speed, vy * v_max / speed
        return OperatorEvent("joystick", [vx, vy], event.timestamp)

    @staticmethod
    def _validate_payload(event: OperatorEvent, grid) -> None:
        def check_pose(xy):
            try:
                p = Pose(float(xy[0]), float(xy[1]))
            except Exception as e:
                raise OutOfBounds(f"bad pose payload: {e}") from e
            if not grid.pose_free(p):
                raise OutOfBounds(f"({p.x}, {p.y}) is not a free in-bounds cell")

        if event.kind == "joystick":
            vx, vy = event.payload
            if not (math.isfinite(vx) and math.isfinite(vy)):
                raise OutOfBounds("joystick velocities must be finite")
        elif event.kind == "waypoint":
            check_pose(event.payload)
        elif event.kind == "goal_set":
            if not isinstance(event.payload, (list, tuple)):
                raise OutOfBounds("goal_set payload must be a list of [x, y]")
            for g in event.payload:
                check_pose(g)

    def frames_from(self, start: int) -> Iterator[dict]:
        """Yield frames in order from seq `start`; blocks while the session
        can still produce frames and ends once it is done or closed."""
        idx = start
        while True:
            with self.cond:
                while idx >= len(self.frames):
                    if self.closed or self.world.done:
                        return
                    self.cond.wait(timeout=0.5)
                frame = self.frames[idx]
            yield frame
            idx += 1

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify_all()


class Gateway:
    """Session registry; the wire server is a thin adapter over this API."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def open_session(self, document: dict, pace: str = "realtime") -> str:
        session = None
        with self._lock:
            sid = f"s{next(self._ids)}"
            session = Session(sid, document, pace=pace)
            self._sessions[sid] = session
        return session.sid

    def _get(self, sid: str) -> Session:
        try:
            return self._sessions[sid]
        except KeyError:
            raise UnknownSession(f"no session {sid!r}") from None

    def submit_event(self, sid: str, event: OperatorEvent) -> dict:
        return self._get(sid).submit(event)

    def stream_frames(self, sid: str, start: int = 0) -> Iterator[dict]:
        return self._get(sid).frames_from(start)

    def session(self, sid: str) -> Session:
        return self._get(sid)

    def close(self) -> None:
        with self._lock:
            for s in self._sessions.values():
                s.close()
            self._sessions.clear()


# --- wire server -------------------------------------------------------------

def _error(message: str, **extra) -> str:
    return json.dumps({"v": PROTOCOL_VERSION, "kind": "error", "message": message, **extra})


class GatewayServer:
    """WebSocket front end; one JSON object per message."""

    def __init__(self, gateway: Gateway | None = None, host: str = "127.0.0.1",
                 port: int = 0):
        self.gateway = gateway or Gateway()
        self._server = ws_serve(self._handler, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True, name="navmix-gateway")

    def start(self) -> "GatewayServer":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self.gateway.close()
        self._server.shutdown()

    def _handler(self, ws) -> None:
        send_lock = threading.Lock()

        def send(obj: dict) -> None:
            with send_lock:
                ws.send(json.dumps(obj))

        send({"v": PROTOCOL_VERSION, "kind": "hello", "server": "navmix"})
        streamer: threading.Thread | None = None
        try:
            for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as e:
                    send({"v": PROTOCOL_VERSION, "kind": "error",
                          "message": f"bad JSON: {e}"})
                    continue
                kind = msg.get("kind")
                try:
                    if kind == "hello":
                        sid = self._attach(msg)
                        send({"v": PROTOCOL_VERSION, "kind": "ack", "session": sid})
                        start = int(msg.get("from", 0))
                        streamer = threading.Thread(
                            target=self._stream, args=(send, sid, start), daemon=True)
                        streamer.start()
                    elif kind == "event":
                        event = OperatorEvent(
                            kind=msg["event"]["kind"],
                            payload=msg["event"].get("payload"),
                            timestamp=msg["event"].get("timestamp"),
                        )
                        ack = self.gateway.submit_event(msg["session"], event)
                        if "id" in msg:
                            ack = {**ack, "id": msg["id"]}
                        send(ack)
                    else:
                        send({"v": PROTOCOL_VERSION, "kind": "error",
                              "message": f"unknown message kind {kind!r}"})
                except (NavmixError, KeyError, ValueError, TypeError) as e:
                    err = {"v": PROTOCOL_VERSION, "kind": "error",
                           "message": f"{type(e).__name__}: {e}"}
                    if isinstance(e, SchemaError):
                        err["path"] = e.path
                    if "id" in msg:
                        err["id"] = msg["id"]
                    send(err)
        except Exception:
            pass  # connection torn down; session lives on

    def _attach(self, msg: dict) -> str:
        if "session" in msg:
            self.gateway.session(msg["session"])  # raises UnknownSession
            return msg["session"]
        if "scenario" not in msg:
            raise SchemaError("hello needs a scenario document or a session id")
        return self.gateway.open_session(msg["scenario"],
                                         pace=msg.get("pace", "realtime"))

    def _stream(self, send, sid: str, start: int) -> None:
        try:
            for frame in self.gateway.stream_frames(sid, start):
                send(frame)
        except Exception:
            pass  # subscriber went away


def serve_gateway(host: str = "127.0.0.1", port: int = 8765,
                  scenario_document: dict | None = None,
                  pace: str = "realtime") -> GatewayServer:
    """Start a gateway server; optionally preload one session."""
    server = GatewayServer(host=host, port=port)
    if scenario_document is not None:
        sid = server.gateway.open_session(scenario_document, pace=pace)
        print(f"session {sid} ready (paused) on ws://{host}:{server.port}")
    return server.start()
