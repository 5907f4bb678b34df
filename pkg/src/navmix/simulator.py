"""Deterministic receding-horizon world.

Each tick advances the scripted crowd, folds queued operator events, gates
the crowd through the field of view, rebuilds the plan mixture when the
evidence changed, runs the configured MAP back-end, and applies the first
step of the winning trajectory with exact Euler integration. Every run is
bit-reproducible from the scenario seed, and each logged tick carries enough
to re-run its inference offline.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from .config import PlannerConfig, planner_config_from_json
from .errors import InvariantViolation, NoEvidence, NoPath, SchemaError
from .global_planner import (
    GlobalPlanDistribution,
    GoalSet,
    OperatorEvidence,
    build_distribution,
    condition_on_joystick,
    hold_plan,
)
from .inference import (
    DiscreteInstance,
    InferenceReport,
    brute_force_report,
    importance_sample_map,
    mh_sample_map,
    next_action,
)
from .local_models import AgentTrack, CrowdBelief, RobotState, predict_crowd, visible_tracks
from .trajectory import OccupancyGrid, Pose, Trajectory

COLLISION_DISTANCE = 0.3  # m, separations below this are logged as collisions

_POSE_SCHEMA = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["grid", "robot_start"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "grid": {
            "type": "object",
            "required": ["width", "height", "resolution"],
            "additionalProperties": False,
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "resolution": {"type": "number", "exclusiveMinimum": 0},
                "occupied_cells": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"},
                              "minItems": 2, "maxItems": 2},
                },
            },
        },
        "robot_start": _POSE_SCHEMA,
        "goals": {"type": "array", "items": _POSE_SCHEMA},
        "crowd": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["waypoints", "speed"],
                "additionalProperties": False,
                "properties": {
                    "waypoints": {"type": "array", "minItems": 1, "items": _POSE_SCHEMA},
                    "speed": {"type": "number", "minimum": 0},
                },
            },
        },
        "interventions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "kind", "payload"],
                "additionalProperties": False,
                "properties": {
                    "t": {"type": "number", "minimum": 0},
                    "kind": {"enum": ["joystick", "waypoint", "goal"]},
                    "payload": {},
                },
            },
        },
        "config": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 2},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "tick_limit": {"type": "integer", "minimum": 1},
                "inference": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "method": {"enum": ["importance", "mh", "brute"]},
                        "samples": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"},
                    },
                },
                "potentials": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "h": {"type": "number", "exclusiveMinimum": 0},
                        "alpha": {"type": "number"},
                        "sigma_r": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "models": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "v_max": {"type": "number", "minimum": 0},
                        "sigma_theta": {"type": "number", "minimum": 0},
                        "sigma0": {"type": "number", "exclusiveMinimum": 0},
                        "sigma_g": {"type": "number", "minimum": 0},
                        "fov_radius": {"type": "number", "minimum": 0},
                    },
                },
                "global": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "k": {"type": "integer", "minimum": 1},
                        "lambda": {"type": "number", "exclusiveMinimum": 0},
                        "rho": {"type": "number", "exclusiveMinimum": 1},
                        "kappa": {"type": "number", "minimum": 0},
                        "window": {"type": "number", "minimum": 0},
                    },
                },
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(SCENARIO_SCHEMA)


@dataclass(frozen=True)
class CrowdScript:
    """Waypoint-and-speed script; position is a pure function of time."""

    waypoints: tuple[Pose, ...]
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if not self.waypoints:
            raise ValueError("a crowd script needs at least one waypoint")
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        cum = [0.0]
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            cum.append(cum[-1] + a.distance_to(b))
        object.__setattr__(self, "_cum", tuple(cum))

    def pose_at(self, t: float) -> Pose:
        """Position after travelling speed * t meters of arc; waits at the end."""
        cum = self._cum
        s = min(self.speed * max(t, 0.0), cum[-1])
        if s >= cum[-1]:
            return self.waypoints[-1]
        seg = 0
        while seg < len(cum) - 2 and cum[seg + 1] < s:
            seg += 1
        a, b = self.waypoints[seg], self.waypoints[seg + 1]
        span = cum[seg + 1] - cum[seg]
        frac = 0.0 if span <= 0 else (s - cum[seg]) / span
        return Pose(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y))


@dataclass(frozen=True)
class Intervention:
    t: float
    kind: str        # joystick | waypoint | goal
    payload: Any


@dataclass(frozen=True)
class Scenario:
    grid: OccupancyGrid
    robot_start: Pose
    goals: GoalSet
    crowd: tuple[CrowdScript, ...]
    interventions: tuple[Intervention, ...]
    cfg: PlannerConfig
    name: str = "scenario"


def _pose(xy) -> Pose:
    return Pose(float(xy[0]), float(xy[1]))


def load_scenario(document: dict[str, Any]) -> Scenario:
    """Validate a scenario document and build a Scenario with defaults applied.

    Structural problems raise SchemaError with the offending field path;
    semantic problems (blocked start, goal on an obstacle, off-map scripts)
    raise InvariantViolation.
    """
    err = next(iter(_VALIDATOR.iter_errors(document)), None)
    if err is not None:
        path = ".".join(str(p) for p in err.absolute_path)
        raise SchemaError(err.message, path=path)

    gdoc = document["grid"]
    try:
        grid = OccupancyGrid.from_occupied_cells(
            gdoc["width"], gdoc["height"], gdoc["resolution"],
            gdoc.get("occupied_cells", []))
    except ValueError as e:
        raise InvariantViolation(str(e)) from e

    try:
        cfg = planner_config_from_json(document.get("config", {}))
    except ValueError as e:
        raise SchemaError(str(e), path="config") from e

    robot_start = _pose(document["robot_start"])
    if not grid.pose_free(robot_start):
        raise InvariantViolation("robot_start must lie on a free in-bounds cell")

    goals = []
    for i, g in enumerate(document.get("goals", [])):
        p = _pose(g)
        if not grid.pose_free(p):
            raise InvariantViolation(f"goals[{i}] must lie on a free in-bounds cell")
        goals.append(p)

    crowd = []
    for i, script in enumerate(document.get("crowd", [])):
        wps = [_pose(w) for w in script["waypoints"]]
        for w in wps:
            if not grid.in_bounds(*grid.cell_of(w)):
                raise InvariantViolation(f"crowd[{i}] waypoints must be in bounds")
        crowd.append(CrowdScript(tuple(wps), float(script["speed"])))

    interventions = []
    for i, ev in enumerate(document.get("interventions", [])):
        kind, payload = ev["kind"], ev["payload"]
        path = f"interventions.{i}.payload"
        if kind == "joystick":
            if (not isinstance(payload, (list, tuple)) or len(payload) != 2
                    or not all(isinstance(v, (int, float)) for v in payload)):
                raise SchemaError("joystick payload must be [vx, vy]", path=path)
        elif kind == "waypoint":
            if not isinstance(payload, (list, tuple)) or len(payload) != 2:
                raise SchemaError("waypoint payload must be [x, y]", path=path)
            if not grid.pose_free(_pose(payload)):
                raise InvariantViolation(f"interventions[{i}] waypoint must be free and in bounds")
        elif kind == "goal":
            if not isinstance(payload, list) or any(
                    not isinstance(g, (list, tuple)) or len(g) != 2 for g in payload):
                raise SchemaError("goal payload must be a list of [x, y]", path=path)
            for g in payload:
                if not grid.pose_free(_pose(g)):
                    raise InvariantViolation(f"interventions[{i}] goal must be free and in bounds")
        interventions.append(Intervention(float(ev["t"]), kind, payload))
    interventions.sort(key=lambda e: e.t)

    return Scenario(grid=grid, robot_start=robot_start, goals=GoalSet(tuple(goals)),
                    crowd=tuple(crowd), interventions=tuple(interventions), cfg=cfg,
                    name=document.get("name", "scenario"))


@dataclass
class RunLog:
    """Per-tick records plus summary metrics, serializable as JSON lines."""

    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunLog":
        records, summary = [], {}
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "summary" in obj:
                summary = obj["summary"]
            else:
                records.append(obj)
        return cls(records=records, summary=summary)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()


def tick_seed(scenario_seed: int, tick_index: int) -> int:
    """Deterministic per-tick inference seed, reconstructible offline."""
    ss = np.random.SeedSequence([int(scenario_seed), int(tick_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def brute_action_set(v_max: float) -> tuple[tuple[float, float], ...]:
    """Default action grid for the brute back-end: 8 headings at full and
    half speed, plus stop."""
    actions = [(0.0, 0.0)]
    for k in range(8):
        th = k * math.pi / 4.0
        actions.append((v_max * math.cos(th), v_max * math.sin(th)))
        actions.append((0.5 * v_max * math.cos(th), 0.5 * v_max * math.sin(th)))
    return tuple(actions)


class World:
    """Mutable simulation state; advance with tick(world)."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        cfg = scenario.cfg
        self.cfg = cfg
        self.tick_index = 0
        self.time = 0.0
        self.robot_pose = scenario.robot_start
        self.robot_velocity = (0.0, 0.0)
        self.robot_history: list[tuple[float, Pose]] = [(0.0, scenario.robot_start)]
        self.goals: list[Pose] = list(scenario.goals)
        self.pending_waypoints: list[tuple[float, Pose]] = []
        self.joystick: list[tuple[float, float, float]] = []
        self.tracks: dict[int, list[tuple[float, Pose]]] = {
            i: [(0.0, script.pose_at(0.0))] for i, script in enumerate(scenario.crowd)}
        self._next_intervention = 0
        self._external_events: list[tuple[str, Any]] = []
        self._evidence_sig: tuple | None = None
        self._base_dist: GlobalPlanDistribution | None = None
        self._base_plans: list[Trajectory] = []
        self._dist_version = -1
        self.records: list[dict] = []
        self.done = False
        self.reached_tick: int | None = None
        self.last_visible: list[AgentTrack] = []
        self.last_dist: GlobalPlanDistribution | None = None
        self.last_report: InferenceReport | None = None

    # -- evidence plumbing ----------------------------------------------------

    def enqueue_event(self, kind: str, payload: Any) -> None:
        """Queue an operator event; folded in at the next tick boundary."""
        self._external_events.append((kind, payload))

    def _apply_event(self, kind: str, payload: Any, t: float) -> None:
        if kind == "goal":
            self.goals = [_pose(g) for g in payload]
        elif kind == "waypoint":
            self.pending_waypoints.append((t, _pose(payload)))
        elif kind == "joystick":
            vx, vy = float(payload[0]), float(payload[1])
            speed = math.hypot(vx, vy)
            v_max = self.cfg.models.v_max
            if speed > v_max and speed > 0:
                vx, vy = vx * v_max / speed, vy * v_max / speed
            self.joystick.append((t, vx, vy))

    def _fold_events(self, t_new: float) -> None:
        pending = self.scenario.interventions
        while self._next_intervention < len(pending) and \
                pending[self._next_intervention].t <= t_new:
            ev = pending[self._next_intervention]
            self._apply_event(ev.kind, ev.payload, ev.t)
            self._next_intervention += 1
        for kind, payload in self._external_events:
            self._apply_event(kind, payload, t_new)
        self._external_events.clear()

    def _consume_waypoints(self) -> None:
        reach = self.scenario.grid.resolution
        while self.pending_waypoints and \
                self.pending_waypoints[0][1].distance_to(self.robot_pose) <= reach:
            self.pending_waypoints.pop(0)

    def assistive_mode(self) -> bool:
        return not self.goals and not self.pending_waypoints

    def _evidence(self) -> OperatorEvidence:
        return OperatorEvidence(goals=GoalSet(tuple(self.goals)),
                                waypoints=tuple(self.pending_waypoints),
                                joystick=tuple(self.joystick))

    def _signature(self) -> tuple:
        sig: tuple = (tuple((g.x, g.y) for g in self.goals),
                      tuple((t, p.x, p.y) for t, p in self.pending_waypoints))
        if self.assistive_mode():
            sig = sig + (len(self.joystick),)
        return sig

    def _build_base(self, now: float) -> GlobalPlanDistribution:
        evidence = self._evidence()
        try:
            if self.assistive_mode():
                return build_distribution(self.scenario.grid, self.robot_pose,
                                          evidence, self.cfg.global_plan, now=now)
            stripped = OperatorEvidence(goals=evidence.goals,
                                        waypoints=evidence.waypoints)
            return build_distribution(self.scenario.grid, self.robot_pose,
                                      stripped, self.cfg.global_plan, now=now)
        except (NoEvidence, NoPath):
            return GlobalPlanDistribution(((1.0, hold_plan(self.robot_pose)),))

    def _current_distribution(self, now: float,
                              commit: bool = True) -> tuple[GlobalPlanDistribution, bool]:
        """Base mixture (rebuilt only on evidence change) with per-tick
        joystick conditioning; falls back to a hold plan when planning is
        impossible. With commit=False nothing is cached (preview)."""
        sig = self._signature()
        changed = sig != self._evidence_sig or self._base_dist is None
        if changed:
            base = self._build_base(now)
            if not commit:
                dist = base
                if not self.assistive_mode():
                    dist = condition_on_joystick(base, self._evidence(), self.robot_pose,
                                                 now, self.cfg.global_plan)
                return dist, changed
            self._evidence_sig = sig
            self._base_dist = base
            self._base_plans = list(base.plans())
            self._dist_version += 1
        dist = self._base_dist
        if not self.assistive_mode():
            dist = condition_on_joystick(dist, self._evidence(), self.robot_pose,
                                         now, self.cfg.global_plan)
        return dist, changed

    def _base_id(self, plan: Trajectory) -> int:
        for i, p in enumerate(self._base_plans):
            if p is plan:
                return i
        return self._base_plans.index(plan)

    # -- inference --------------------------------------------------------

    def _run_inference(self, dist: GlobalPlanDistribution, belief: CrowdBelief,
                       seed: int) -> InferenceReport:
        state = RobotState(pose=self.robot_pose, velocity=self.robot_velocity,
                           history=tuple(self.robot_history))
        inf = self.cfg.inference
        if inf.method == "importance":
            return importance_sample_map(dist, state, belief, inf.samples, seed, self.cfg)
        if inf.method == "mh":
            return mh_sample_map(dist, state, belief, inf.samples, seed, self.cfg)
        instance = DiscreteInstance(brute_action_set(self.cfg.models.v_max),
                                    horizon=self.cfg.horizon - 1)
        return brute_force_report(dist, state, belief, instance, self.cfg, seed=seed)

    def plan_and_infer(self, now: float, seed: int, commit: bool = True):
        """Shared per-tick pipeline: gate crowd, build mixture, run MAP."""
        visible = visible_tracks(
            [AgentTrack(aid, tuple(obs)) for aid, obs in sorted(self.tracks.items())],
            self.robot_pose, self.cfg.models.fov_radius)
        belief = predict_crowd(visible, self.cfg.horizon - 1, self.cfg.dt, self.cfg.models)
        dist, version_changed = self._current_distribution(now, commit=commit)
        report = self._run_inference(dist, belief, seed)
        return visible, belief, dist, version_changed, report

    def preview(self):
        """Tick-0 view (distribution + inference) without advancing or
        caching anything; used for a session's initial telemetry frame."""
        seed = tick_seed(self.cfg.inference.seed, 0)
        visible, _belief, dist, _changed, report = self.plan_and_infer(
            0.0, seed, commit=False)
        return visible, dist, report

    # -- one tick -----------------------------------------------------------

    def step(self) -> None:
        if self.done:
            raise RuntimeError("world is terminal; no further ticks")
        cfg = self.cfg
        k = self.tick_index + 1
        t_new = k * cfg.dt

        for aid, script in enumerate(self.scenario.crowd):
            self.tracks[aid].append((t_new, script.pose_at(t_new)))
        self._fold_events(t_new)
        self._consume_waypoints()

        seed = tick_seed(cfg.inference.seed, k)
        visible, belief, dist, version_changed, report = self.plan_and_infer(t_new, seed)
        self.last_visible = visible
        self.last_dist = dist
        self.last_report = report

        vx, vy = next_action(report, cfg.models.v_max)
        new_pose = Pose(self.robot_pose.x + vx * cfg.dt, self.robot_pose.y + vy * cfg.dt)
        self.robot_pose = new_pose
        self.robot_velocity = (vx, vy)
        self.robot_history.append((t_new, new_pose))
        self.tick_index = k
        self.time = t_new

        chosen_plan = dist.plans()[report.assignment.component_index]
        chosen_id = self._base_id(chosen_plan)
        min_sep = None
        for tr in visible:
            d = tr.last()[1].distance_to(new_pose)
            min_sep = d if min_sep is None else min(min_sep, d)

        record = {
            "tick": k,
            "time": t_new,
            "seed": seed,
            "robot": {"x": new_pose.x, "y": new_pose.y, "vx": vx, "vy": vy},
            "cmd": [vx, vy],
            "version": self._dist_version,
            "components": [{"id": self._base_id(p), "w": w} for w, p in dist.components],
            "chosen": chosen_id,
            "density": report.assignment.density,
            "mass": [{"id": self._base_id(dist.plans()[m.index]),
                      "max": m.max_density, "mean": m.mean_density}
                     for m in report.per_component_mass],
            "crowd": self._crowd_record(visible),
            "evidence": {
                "goals": len(self.goals),
                "waypoints": len(self.pending_waypoints),
                "joystick": len(self._evidence().joystick_vectors(
                    t_new, cfg.global_plan.window)),
                "assistive": self.assistive_mode(),
            },
            "min_sep": min_sep,
        }
        if version_changed:
            record["plans"] = [[[p.x, p.y] for p in plan.points] for plan in self._base_plans]
        self.records.append(record)

        if self.goals and any(g.distance_to(new_pose) <= self.scenario.grid.resolution
                              for g in self.goals):
            self.done = True
            self.reached_tick = k
        elif k >= cfg.tick_limit:
            self.done = True

    @staticmethod
    def _crowd_record(visible) -> list[dict]:
        out = []
        for tr in visible:
            t1, p1 = tr.observations[-1]
            entry = {"id": tr.agent_id, "x": p1.x, "y": p1.y,
                     "px": None, "py": None, "pt": None}
            if len(tr.observations) >= 2:
                t0, p0 = tr.observations[-2]
                entry.update({"px": p0.x, "py": p0.y, "pt": t0})
            out.append(entry)
        return out

    # -- run + summary ------------------------------------------------------

    def run_log(self) -> RunLog:
        path_len = 0.0
        prev = self.scenario.robot_start
        min_sep = None
        switches = 0
        collisions = 0
        prev_chosen = None
        for r in self.records:
            p = Pose(r["robot"]["x"], r["robot"]["y"])
            path_len += prev.distance_to(p)
            prev = p
            if r["min_sep"] is not None:
                min_sep = r["min_sep"] if min_sep is None else min(min_sep, r["min_sep"])
                if r["min_sep"] < COLLISION_DISTANCE:
                    collisions += 1
            if prev_chosen is not None and r["chosen"] != prev_chosen:
                switches += 1
            prev_chosen = r["chosen"]
        summary = {
            "scenario": self.scenario.name,
            "seed": self.cfg.inference.seed,
            "method": self.cfg.inference.method,
            "reached": self.reached_tick is not None,
            "ticks": self.tick_index,
            "ticks_to_goal": self.reached_tick,
            "path_length": path_len,
            "min_separation": min_sep,
            "component_switches": switches,
            "collision_ticks": collisions,
        }
        return RunLog(records=list(self.records), summary=summary)


def tick(world: World) -> World:
    """Advance the world by one tick and return it."""
    world.step()
    return world


def run(scenario: Scenario) -> RunLog:
    """Tick until a goal is within one grid cell or the tick limit hits."""
    world = World(scenario)
    while not world.done:
        world.step()
    return world.run_log()


# --- offline replay of a logged tick ----------------------------------------

def reconstruct_tick_inputs(log: RunLog, index: int, scenario: Scenario):
    """Rebuild the inference inputs of records[index] from the log alone.

    Returns (dist, robot_state, belief, seed); running the scenario's
    configured back-end on these reproduces the logged decision exactly.
    """
    record = log.records[index]
    plans = None
    for r in log.records[:index + 1]:
        if "plans" in r:
            plans = r["plans"]
    if plans is None:
        raise ValueError("no plan polylines at or before the requested record")
    plan_trajs = [Trajectory.from_xy(np.asarray(p), dt=1.0) for p in plans]
    components = tuple((c["w"], plan_trajs[c["id"]]) for c in record["components"])
    dist = GlobalPlanDistribution(components)

    if index == 0:
        pose = scenario.robot_start
        velocity = (0.0, 0.0)
    else:
        prev = log.records[index - 1]
        pose = Pose(prev["robot"]["x"], prev["robot"]["y"])
        velocity = (prev["robot"]["vx"], prev["robot"]["vy"])
    state = RobotState(pose=pose, velocity=velocity)

    tracks = []
    for c in record["crowd"]:
        obs = []
        if c["pt"] is not None:
            obs.append((c["pt"], Pose(c["px"], c["py"])))
        obs.append((record["time"], Pose(c["x"], c["y"])))
        tracks.append(AgentTrack(c["id"], tuple(obs)))
    belief = predict_crowd(tracks, scenario.cfg.horizon - 1, scenario.cfg.dt,
                           scenario.cfg.models) if tracks else CrowdBelief()
    return dist, state, belief, record["seed"]
