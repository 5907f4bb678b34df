"""Global-plan mixture: candidate routes and their weights.

Produces a weighted finite mixture of route trajectories from whatever
operator evidence exists: goals (routed through pending waypoints), a
joystick stream that reweights goal-derived plans by directional agreement,
or - with no goals at all - a single ray plan inferred from the joystick
alone (assistive mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .config import GlobalPlanConfig
from .errors import EmptyDistribution, InvalidEndpoint, NoEvidence, NoPath, NonpositiveWeight
from .trajectory import OccupancyGrid, Pose, Trajectory, project_progress

_SQRT2 = math.sqrt(2.0)
_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class GoalSet:
    """Ordered operator goals; may be empty."""

    goals: tuple[Pose, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "goals", tuple(self.goals))

    def __len__(self):
        return len(self.goals)

    def __iter__(self):
        return iter(self.goals)

    def __bool__(self):
        return bool(self.goals)


@dataclass(frozen=True)
class OperatorEvidence:
    """Goals, time-stamped waypoints, and the joystick stream z^h.

    waypoints entries are (timestamp, pose); joystick entries are
    (timestamp, vx, vy). Timestamps must be nondecreasing per stream.
    """

    goals: GoalSet = GoalSet()
    waypoints: tuple[tuple[float, Pose], ...] = ()
    joystick: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "joystick", tuple(self.joystick))
        for name, stamps in (("waypoints", [t for t, _ in self.waypoints]),
                             ("joystick", [t for t, *_ in self.joystick])):
            if any(b < a for a, b in zip(stamps, stamps[1:])):
                raise ValueError(f"{name} timestamps must be nondecreasing")

    def is_empty(self) -> bool:
        return not self.goals and not self.waypoints and not self.joystick

    def latest_time(self) -> float:
        stamps = [t for t, _ in self.waypoints] + [t for t, *_ in self.joystick]
        return max(stamps) if stamps else 0.0

    def joystick_vectors(self, now: float, window: float) -> list[tuple[float, float]]:
        """Nonzero joystick vectors observed within `window` seconds of `now`."""
        out = []
        for t, vx, vy in self.joystick:
            if now - window <= t <= now and math.hypot(vx, vy) > 1e-9:
                out.append((vx, vy))
        return out


@dataclass(frozen=True)
class GlobalPlanDistribution:
    """Weighted finite mixture of route plans.

    Weights are strictly positive, sum to one, and components are sorted by
    descending weight (stable for ties).
    """

    components: tuple[tuple[float, Trajectory], ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise EmptyDistribution("distribution needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise NonpositiveWeight("component weights must be strictly positive")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {total}")
        if any(comps[i][0] < comps[i + 1][0] for i in range(len(comps) - 1)):
            raise ValueError("components must be sorted by descending weight")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_plans(cls, plans, weights) -> "GlobalPlanDistribution":
        """Normalize, sort descending (stable), and wrap."""
        plans = list(plans)
        weights = [float(w) for w in weights]
        if len(plans) != len(weights):
            raise ValueError("one weight per plan required")
        if any(w <= 0 for w in weights):
            raise NonpositiveWeight("component weights must be strictly positive")
        total = sum(weights)
        order = sorted(range(len(plans)), key=lambda i: -weights[i])
        return cls(tuple((weights[i] / total, plans[i]) for i in order))

    def __len__(self):
        return len(self.components)

    def weights(self) -> tuple[float, ...]:
        return tuple(w for w, _ in self.components)

    def plans(self) -> tuple[Trajectory, ...]:
        return tuple(p for _, p in self.components)


# --- A* over the occupancy grid -------------------------------------------

# 8-connected moves; diagonals cost sqrt(2) and may not cut corners (both
# orthogonal neighbours of a diagonal move must be free).
_MOVES = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2))


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return (dx + dy) + (_SQRT2 - 2.0) * min(dx, dy)


def _astar_cells(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int],
                 penalty: np.ndarray | None = None) -> list[tuple[int, int]] | None:
    """Cell path from start to goal, or None. Costs are cell units times the
    per-cell penalty multiplier of the cell being entered (>= 1 keeps the
    octile heuristic admissible)."""
    if start == goal:
        return [start]
    open_heap = [(_octile(start, goal), 0, start)]
    g = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 1
    closed = set()
    while open_heap:
        _, _, cur = heappop(open_heap)
        if cur == goal:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            path.reverse()
            return path
        if cur in closed:
            continue
        closed.add(cur)
        cx, cy = cur
        for dx, dy, base in _MOVES:
            nx, ny = cx + dx, cy + dy
            if not grid.is_free(nx, ny):
                continue
            if dx != 0 and dy != 0:
                if not (grid.is_free(cx + dx, cy) and grid.is_free(cx, cy + dy)):
                    continue
            cost = base if penalty is None else base * penalty[ny, nx]
            tentative = g[cur] + cost
            nxt = (nx, ny)
            if tentative < g.get(nxt, math.inf):
                g[nxt] = tentative
                came[nxt] = cur
                heappush(open_heap, (tentative + _octile(nxt, goal), counter, nxt))
                counter += 1
    return None


def _cells_to_trajectory(grid: OccupancyGrid, cells) -> Trajectory:
    return Trajectory(tuple(grid.center_of(cx, cy) for cx, cy in cells), dt=1.0)


def _require_free_cell(grid: OccupancyGrid, pose: Pose, label: str) -> tuple[int, int]:
    cell = grid.cell_of(pose)
    if not grid.in_bounds(*cell):
        raise InvalidEndpoint(f"{label} ({pose.x}, {pose.y}) is outside the grid")
    if not grid.is_free(*cell):
        raise InvalidEndpoint(f"{label} ({pose.x}, {pose.y}) lies on an occupied cell")
    return cell


def astar(grid: OccupancyGrid, start: Pose, goal: Pose) -> Trajectory:
    """Minimum-cost 8-connected grid route between the cells containing start
    and goal, as a trajectory of cell centers."""
    s = _require_free_cell(grid, start, "start")
    g = _require_free_cell(grid, goal, "goal")
    cells = _astar_cells(grid, s, g)
    if cells is None:
        raise NoPath(f"no route from cell {s} to cell {g}")
    return _cells_to_trajectory(grid, cells)


def _route_cells(grid: OccupancyGrid, start_cell, via_cells, goal_cell,
                 penalty: np.ndarray | None) -> list[tuple[int, int]] | None:
    """Concatenated leg-by-leg path start -> via... -> goal."""
    route: list[tuple[int, int]] = []
    cur = start_cell
    for target in list(via_cells) + [goal_cell]:
        leg = _astar_cells(grid, cur, target, penalty)
        if leg is None:
            return None
        route.extend(leg if not route else leg[1:])
        cur = target
    return route


def k_diverse_plans(grid: OccupancyGrid, start: Pose, goal: Pose, k: int,
                    rho: float = 2.0, waypoints: tuple[Pose, ...] = ()) -> list[Trajectory]:
    """Up to k distinct routes via iterated A* with reuse penalties.

    The first plan is the unpenalized optimum; cells used by each accepted
    plan have their traversal cost multiplied by rho (> 1) before the next
    attempt, steering later searches onto alternative routes. Gives up after
    4k attempts; returned plans are pairwise distinct as cell sequences.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not rho > 1:
        raise ValueError(f"rho must be > 1, got {rho}")
    s = _require_free_cell(grid, start, "start")
    g = _require_free_cell(grid, goal, "goal")
    via = [_require_free_cell(grid, wp, "waypoint") for wp in waypoints]

    penalty = np.ones((grid.height, grid.width), dtype=float)
    plans: list[Trajectory] = []
    seen: set[tuple[tuple[int, int], ...]] = set()
    attempts = 0
    while len(plans) < k and attempts < 4 * k:
        attempts += 1
        cells = _route_cells(grid, s, via, g, penalty)
        if cells is None:
            if not plans:
                raise NoPath(f"no route from cell {s} to cell {g}")
            break
        for c in set(cells):
            penalty[c[1], c[0]] *= rho
        key = tuple(cells)
        if key in seen:
            continue
        seen.add(key)
        plans.append(_cells_to_trajectory(grid, cells))
    return plans


def plan_weights(plans, lam: float) -> list[float]:
    """Length-softmax weights: w_i proportional to exp(-lam * arc_length_i).

    Strictly shorter plans get strictly larger weights.
    """
    plans = list(plans)
    if not plans:
        raise ValueError("plan_weights requires at least one plan")
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    logits = [-lam * p.arc_length() for p in plans]
    peak = max(logits)
    raw = [math.exp(z - peak) for z in logits]
    total = sum(raw)
    return [r / total for r in raw]


# --- joystick conditioning and assistive mode ------------------------------

def _local_direction(plan: Trajectory, idx: int) -> tuple[float, float] | None:
    """Unit direction of the plan at point idx, or None for a degenerate plan."""
    pts = plan.points
    for j in range(idx, len(pts) - 1):
        dx, dy = pts[j + 1].x - pts[j].x, pts[j + 1].y - pts[j].y
        n = math.hypot(dx, dy)
        if n > 1e-12:
            return dx / n, dy / n
    for j in range(min(idx, len(pts) - 1), 0, -1):
        dx, dy = pts[j].x - pts[j - 1].x, pts[j].y - pts[j - 1].y
        n = math.hypot(dx, dy)
        if n > 1e-12:
            return dx / n, dy / n
    return None


def _angle_between(v: tuple[float, float], d: tuple[float, float]) -> float:
    cross = v[0] * d[1] - v[1] * d[0]
    dot = v[0] * d[0] + v[1] * d[1]
    return abs(math.atan2(cross, dot))


def joystick_misalignment(plan: Trajectory, robot_pose: Pose,
                          vectors) -> float:
    """Mean squared angle between joystick vectors and the plan's local
    direction at the robot's projected progress point."""
    vectors = list(vectors)
    if not vectors:
        return 0.0
    direction = _local_direction(plan, project_progress(plan, robot_pose))
    if direction is None:
        return 0.0
    return sum(_angle_between(v, direction) ** 2 for v in vectors) / len(vectors)


def condition_on_joystick(dist: GlobalPlanDistribution, evidence: OperatorEvidence,
                          robot_pose: Pose, now: float,
                          cfg: GlobalPlanConfig) -> GlobalPlanDistribution:
    """Reweight a goal-derived mixture by joystick directional agreement.

    Each component weight is multiplied by exp(-kappa * misalignment) and the
    result renormalized; the component set itself never changes. With no
    joystick vectors in the window the input distribution is returned as is.
    """
    vectors = evidence.joystick_vectors(now, cfg.window)
    if not vectors:
        return dist
    reweighted = [w * math.exp(-cfg.kappa * joystick_misalignment(plan, robot_pose, vectors))
                  for w, plan in dist.components]
    return GlobalPlanDistribution.from_plans(dist.plans(), reweighted)


def hold_plan(robot_pose: Pose) -> Trajectory:
    """Single-point stay-where-you-are plan."""
    return Trajectory((robot_pose,), dt=1.0)


def assistive_ray(grid: OccupancyGrid, robot_pose: Pose,
                  vectors) -> Trajectory:
    """Straight ray from the robot along the mean joystick direction, sampled
    at grid resolution and clipped at the first obstacle or the map edge."""
    vectors = list(vectors)
    if not vectors:
        return hold_plan(robot_pose)
    mx = sum(v[0] for v in vectors) / len(vectors)
    my = sum(v[1] for v in vectors) / len(vectors)
    norm = math.hypot(mx, my)
    if norm < 1e-9:
        return hold_plan(robot_pose)
    ux, uy = mx / norm, my / norm
    step = grid.resolution
    limit = int(math.ceil((grid.width + grid.height) * 1.5))
    points = [robot_pose]
    for i in range(1, limit + 1):
        p = Pose(robot_pose.x + ux * step * i, robot_pose.y + uy * step * i)
        if not grid.pose_free(p):
            break
        points.append(p)
    return Trajectory(tuple(points), dt=1.0)


def build_distribution(grid: OccupancyGrid, robot_pose: Pose, evidence: OperatorEvidence,
                       cfg: GlobalPlanConfig, now: float | None = None) -> GlobalPlanDistribution:
    """Global-plan distribution given the current operator evidence.

    - goals present: k diverse plans per goal, routed through pending
      waypoints in timestamp order, weighted by length softmax, then
      conditioned on the recent joystick window.
    - waypoints only: the last waypoint acts as the destination, earlier
      ones as route constraints.
    - joystick only (assistive): a single ray plan with weight 1.
    """
    if evidence.is_empty():
        raise NoEvidence("need goals, waypoints, or joystick data")
    if now is None:
        now = evidence.latest_time()

    wp_poses = tuple(p for _, p in evidence.waypoints)
    if evidence.goals:
        plans: list[Trajectory] = []
        failures = 0
        for goal in evidence.goals:
            try:
                plans.extend(k_diverse_plans(grid, robot_pose, goal, cfg.k, cfg.rho,
                                             waypoints=wp_poses))
            except NoPath:
                failures += 1
        if not plans:
            raise NoPath(f"all {failures} goals unreachable")
        base = GlobalPlanDistribution.from_plans(plans, plan_weights(plans, cfg.lam))
        return condition_on_joystick(base, evidence, robot_pose, now, cfg)

    if wp_poses:
        plans = k_diverse_plans(grid, robot_pose, wp_poses[-1], cfg.k, cfg.rho,
                                waypoints=wp_poses[:-1])
        base = GlobalPlanDistribution.from_plans(plans, plan_weights(plans, cfg.lam))
        return condition_on_joystick(base, evidence, robot_pose, now, cfg)

    vectors = evidence.joystick_vectors(now, cfg.window)
    if not vectors:
        raise NoEvidence("joystick data is stale; no recent samples in window")
    return GlobalPlanDistribution.from_plans([assistive_ray(grid, robot_pose, vectors)], [1.0])
