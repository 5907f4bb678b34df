"""Planar trajectory and grid-map primitives shared by the whole stack.

All types are immutable values and all operations are pure; cross-trajectory
math (deviations, potentials) requires both operands to share length and tick
spacing, which `resample` and `window_plan` establish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InvalidTrajectory

_SNAP = 1e-9  # interpolation fractions this close to a grid point snap onto it


@dataclass(frozen=True, slots=True)
class Pose:
    """A planar position in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidTrajectory(f"pose must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Pose") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly time-sampled planar path.

    points[i] is the pose at tick start_tick + i; consecutive points are dt
    seconds apart. A trajectory is kinematically feasible for a speed limit
    v_max when no per-tick displacement exceeds v_max * dt.
    """

    points: tuple[Pose, ...]
    dt: float = 1.0
    start_tick: int = 0

    def __post_init__(self):
        pts = tuple(self.points)
        if len(pts) < 1:
            raise InvalidTrajectory("trajectory needs at least one point")
        if not self.dt > 0:
            raise InvalidTrajectory(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def xy(self) -> np.ndarray:
        """Points as an (n, 2) float array (a fresh copy)."""
        return np.array([(p.x, p.y) for p in self.points], dtype=float)

    @classmethod
    def from_xy(cls, xy, dt: float = 1.0, start_tick: int = 0) -> "Trajectory":
        return cls(tuple(Pose(float(x), float(y)) for x, y in xy), dt=dt, start_tick=start_tick)

    def arc_length(self) -> float:
        """Total polyline length in meters."""
        return sum(a.distance_to(b) for a, b in zip(self.points, self.points[1:]))

    def is_kinematically_feasible(self, v_max: float, tol: float = 1e-9) -> bool:
        limit = v_max * self.dt + tol
        return all(a.distance_to(b) <= limit for a, b in zip(self.points, self.points[1:]))


@dataclass(frozen=True)
class OccupancyGrid:
    """Static obstacle map.

    Cell (cx, cy) covers [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res); the
    occupancy array is indexed occupied[cy, cx].
    """

    width: int
    height: int
    resolution: float
    occupied: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        occ = np.array(self.occupied, dtype=bool)
        if occ.shape != (self.height, self.width):
            raise ValueError(f"occupancy shape {occ.shape} != (height, width)")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)

    @classmethod
    def empty(cls, width: int, height: int, resolution: float = 1.0) -> "OccupancyGrid":
        return cls(width, height, resolution, np.zeros((height, width), dtype=bool))

    @classmethod
    def from_occupied_cells(cls, width, height, resolution, cells) -> "OccupancyGrid":
        occ = np.zeros((height, width), dtype=bool)
        for cx, cy in cells:
            if not (0 <= cx < width and 0 <= cy < height):
                raise ValueError(f"occupied cell ({cx}, {cy}) out of bounds")
            occ[cy, cx] = True
        return cls(width, height, resolution, occ)

    def in_bounds(self, cx: int, cy: int) -> bool:
        return 0 <= cx < self.width and 0 <= cy < self.height

    def is_free(self, cx: int, cy: int) -> bool:
        return self.in_bounds(cx, cy) and not self.occupied[cy, cx]

    def cell_of(self, pose: Pose) -> tuple[int, int]:
        return int(math.floor(pose.x / self.resolution)), int(math.floor(pose.y / self.resolution))

    def center_of(self, cx: int, cy: int) -> Pose:
        return Pose((cx + 0.5) * self.resolution, (cy + 0.5) * self.resolution)

    def pose_free(self, pose: Pose) -> bool:
        return self.is_free(*self.cell_of(pose))


def resample(traj: Trajectory, dt_new: float, horizon: int) -> Trajectory:
    """Re-sample onto `horizon` points spaced `dt_new` seconds apart.

    Positions come from linear interpolation along the input's own time base;
    past the input's end the final pose repeats (a finished plan waits rather
    than overshooting). Resampling a trajectory onto its own (dt, length) is
    an exact no-op.
    """
    if not isinstance(traj, Trajectory) or len(traj.points) < 1:
        raise InvalidTrajectory("resample requires a nonempty trajectory")
    if not dt_new > 0:
        raise ValueError(f"dt_new must be > 0, got {dt_new}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    pts = traj.points
    last = len(pts) - 1
    out = []
    for j in range(horizon):
        u = j * dt_new / traj.dt  # position in input tick units
        i = int(math.floor(u))
        if i >= last:
            out.append(pts[last])
            continue
        frac = u - i
        if frac < _SNAP:
            out.append(pts[i])
        elif frac > 1.0 - _SNAP:
            out.append(pts[i + 1])
        else:
            a, b = pts[i], pts[i + 1]
            out.append(Pose(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y)))
    return Trajectory(tuple(out), dt=dt_new, start_tick=traj.start_tick)


def squared_deviation(a: Trajectory, b: Trajectory) -> float:
    """Sum over ticks of the squared pointwise distance, in meters squared.

    Symmetric, and zero exactly when the trajectories coincide pointwise.
    """
    _check_aligned(a, b)
    return float(sum((pa.x - pb.x) ** 2 + (pa.y - pb.y) ** 2
                     for pa, pb in zip(a.points, b.points)))


def _check_aligned(a: Trajectory, b: Trajectory) -> None:
    if len(a.points) != len(b.points):
        raise AlignmentError(f"length mismatch: {len(a.points)} vs {len(b.points)}")
    if abs(a.dt - b.dt) > 1e-12:
        raise AlignmentError(f"tick spacing mismatch: {a.dt} vs {b.dt}")


def project_progress(plan: Trajectory, pose: Pose) -> int:
    """Index of the plan point nearest `pose`, ties broken forward.

    Preferring the larger index on ties keeps the robot from stalling where a
    plan passes near itself.
    """
    best_i = 0
    best_d = math.inf
    for i, p in enumerate(plan.points):
        d = (p.x - pose.x) ** 2 + (p.y - pose.y) ** 2
        if d <= best_d:
            best_i, best_d = i, d
    return best_i


def window_plan(plan: Trajectory, pose: Pose, horizon: int, dt: float,
                speed: float) -> Trajectory:
    """Local window of a long plan, aligned to a (dt, horizon) time base.

    The window starts at the plan point nearest `pose` and advances along the
    plan's polyline at `speed` meters per second, i.e. point k sits k*speed*dt
    meters of arc ahead of the projection; at the plan's end the final pose
    repeats. The result is directly comparable with local trajectory samples.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if speed < 0:
        raise ValueError(f"speed must be >= 0, got {speed}")

    start = project_progress(plan, pose)
    tail = plan.points[start:]
    # cumulative arc length along the remaining polyline
    cum = [0.0]
    for a, b in zip(tail, tail[1:]):
        cum.append(cum[-1] + a.distance_to(b))
    total = cum[-1]

    step = speed * dt
    out = []
    seg = 0
    for k in range(horizon):
        s = k * step
        if s >= total or len(tail) == 1:
            out.append(tail[-1])
            continue
        while seg < len(cum) - 2 and cum[seg + 1] < s:
            seg += 1
        a, b = tail[seg], tail[seg + 1]
        span = cum[seg + 1] - cum[seg]
        frac = 0.0 if span <= 0 else (s - cum[seg]) / span
        if frac < _SNAP:
            out.append(a)
        elif frac > 1.0 - _SNAP:
            out.append(b)
        else:
            out.append(Pose(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y)))
    return Trajectory(tuple(out), dt=dt, start_tick=plan.start_tick)
