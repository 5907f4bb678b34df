"""Low-level priors: robot kinematic model and crowd prediction.

The robot prior is a motion-primitive family: each draw picks a constant
commanded speed in [0, v_max] and an initial heading uniform on the circle,
then integrates with per-tick Gaussian heading jitter. Its density is
evaluated per step (speed uniform, heading a Gaussian random walk), which is
proportional to the generative parameterization on constant-speed primitives
and stays positive on every kinematically feasible trajectory.

The crowd model extrapolates each track at constant velocity with isotropic
noise that grows linearly with prediction depth. Both models are stand-ins
behind stable contracts and can be swapped without touching the potentials
or the samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .config import ModelConfig
from .trajectory import Pose, Trajectory

_TWO_PI = 2.0 * math.pi
_STEP_EPS = 1e-12      # displacements at or below this count as standing still
_FEAS_SLACK = 1e-9     # relative slack on the per-tick speed limit
_ANGLE_TOL = 1e-9      # heading tolerance when sigma_theta == 0
_U_CLIP = 1e-12        # keeps inverse-CDF transforms finite


@dataclass(frozen=True)
class RobotState:
    """Platform pose, velocity, and time-stamped pose history."""

    pose: Pose
    velocity: tuple[float, float] = (0.0, 0.0)
    history: tuple[tuple[float, Pose], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        object.__setattr__(self, "history", tuple(self.history))


@dataclass(frozen=True)
class AgentTrack:
    """Observed positions of one crowd agent, strictly increasing in time."""

    agent_id: int
    observations: tuple[tuple[float, Pose], ...]

    def __post_init__(self):
        obs = tuple(self.observations)
        if len(obs) < 1:
            raise ValueError("a track needs at least one observation")
        stamps = [t for t, _ in obs]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("observation timestamps must be strictly increasing")
        object.__setattr__(self, "observations", obs)

    def last(self) -> tuple[float, Pose]:
        return self.observations[-1]


@dataclass(frozen=True)
class AgentBelief:
    """Predictive distribution for one agent.

    `mean` holds the future positions (one per tick ahead); `stds` the
    per-tick isotropic standard deviation; `anchor` the agent's last observed
    position, pinned when building trajectories aligned with local robot
    samples.
    """

    agent_id: int
    anchor: Pose
    mean: Trajectory
    stds: tuple[float, ...]

    def __post_init__(self):
        stds = tuple(float(s) for s in self.stds)
        if len(stds) != len(self.mean.points):
            raise ValueError("one std per predicted tick required")
        if any(s <= 0 for s in stds):
            raise ValueError("prediction std must be > 0")
        if any(b < a for a, b in zip(stds, stds[1:])):
            raise ValueError("prediction std must be nondecreasing with depth")
        object.__setattr__(self, "stds", stds)

    def anchored_mean(self) -> Trajectory:
        """Mean path including the anchor, aligned with local samples."""
        return Trajectory((self.anchor,) + self.mean.points, dt=self.mean.dt)


@dataclass(frozen=True)
class CrowdBelief:
    """Per-agent predictive distributions; empty when no agents are visible."""

    agents: tuple[AgentBelief, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))

    def __len__(self):
        return len(self.agents)

    def is_empty(self) -> bool:
        return not self.agents

    def horizon(self) -> int:
        return len(self.agents[0].mean.points) if self.agents else 0


def visible_tracks(tracks, robot_pose: Pose, fov_radius: float) -> list[AgentTrack]:
    """Tracks whose most recent observation lies within the closed sensing
    disk around the robot; occlusion is not modeled."""
    if fov_radius < 0:
        raise ValueError(f"fov_radius must be >= 0, got {fov_radius}")
    return [tr for tr in tracks if tr.last()[1].distance_to(robot_pose) <= fov_radius]


def predict_crowd(tracks, horizon: int, dt: float, cfg: ModelConfig) -> CrowdBelief:
    """Constant-velocity extrapolation with linearly growing isotropic noise.

    The velocity comes from the last two observations (zero with only one);
    predicted tick k (k = 1..horizon) has std sigma0 + sigma_g * k. An empty
    track list yields an empty belief.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    agents = []
    for tr in tracks:
        t1, p1 = tr.observations[-1]
        if len(tr.observations) >= 2:
            t0, p0 = tr.observations[-2]
            span = t1 - t0
            vx, vy = (p1.x - p0.x) / span, (p1.y - p0.y) / span
        else:
            vx, vy = 0.0, 0.0
        mean = Trajectory(tuple(Pose(p1.x + vx * k * dt, p1.y + vy * k * dt)
                                for k in range(1, horizon + 1)), dt=dt)
        stds = tuple(cfg.sigma0 + cfg.sigma_g * k for k in range(1, horizon + 1))
        agents.append(AgentBelief(tr.agent_id, p1, mean, stds))
    return CrowdBelief(tuple(agents))


# --- robot motion-primitive prior ------------------------------------------

def primitive_dims(horizon: int) -> int:
    """Uniform-block columns one robot sample consumes: speed, heading, jitter."""
    return 2 + max(horizon - 2, 0)


def integrate_primitives(pose: Pose, speeds: np.ndarray, headings: np.ndarray,
                         jitter: np.ndarray, horizon: int, dt: float) -> np.ndarray:
    """Roll constant-speed, jittered-heading primitives into point arrays.

    speeds (n,), headings (n,), jitter (n, horizon-2) -> points (n, horizon, 2)
    with points[:, 0] at the current pose.
    """
    n = speeds.shape[0]
    pts = np.empty((n, horizon, 2), dtype=float)
    pts[:, 0, 0] = pose.x
    pts[:, 0, 1] = pose.y
    if horizon == 1:
        return pts
    theta = np.empty((n, horizon - 1), dtype=float)
    theta[:, 0] = headings
    if horizon > 2:
        theta[:, 1:] = headings[:, None] + np.cumsum(jitter, axis=1)
    step = speeds[:, None] * dt
    dx = np.cumsum(step * np.cos(theta), axis=1)
    dy = np.cumsum(step * np.sin(theta), axis=1)
    pts[:, 1:, 0] = pose.x + dx
    pts[:, 1:, 1] = pose.y + dy
    return pts


def primitives_from_uniforms(pose: Pose, u: np.ndarray, horizon: int, dt: float,
                             cfg: ModelConfig) -> np.ndarray:
    """Map a per-sample uniform block (n, primitive_dims) to sample points.

    Deterministic inverse-CDF transforms keep each sample a fixed slice of
    the underlying stream, so sample i is identical for any batch size n > i.
    """
    u = np.clip(u, _U_CLIP, 1.0 - _U_CLIP)
    speeds = u[:, 0] * cfg.v_max
    headings = (u[:, 1] * 2.0 - 1.0) * math.pi
    jitter = ndtri(u[:, 2:]) * cfg.sigma_theta if horizon > 2 else np.empty((u.shape[0], 0))
    return integrate_primitives(pose, speeds, headings, jitter, horizon, dt)


def sample_robot_prior(state: RobotState, n: int, horizon: int, dt: float,
                       cfg: ModelConfig, rng: np.random.Generator) -> list[Trajectory]:
    """Draw n kinematically feasible trajectories from the primitive family."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    u = rng.random((n, primitive_dims(horizon)))
    pts = primitives_from_uniforms(state.pose, u, horizon, dt, cfg)
    return [Trajectory.from_xy(pts[i], dt=dt) for i in range(n)]


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def robot_prior_log_density(traj: Trajectory, cfg: ModelConfig) -> float:
    """Log density of a trajectory under the per-step primitive model.

    Per step: speed uniform on [0, v_max] (feasibility indicator included),
    first moving step's heading uniform on the circle, later moving steps'
    heading increments Gaussian with sigma_theta. Standing-still steps carry
    no heading term. Returns -inf off the feasible set.
    """
    pts = traj.points
    if len(pts) < 2:
        return 0.0
    if cfg.v_max == 0.0:
        still = all(a.distance_to(b) <= _STEP_EPS for a, b in zip(pts, pts[1:]))
        return 0.0 if still else -math.inf
    limit = cfg.v_max * traj.dt * (1.0 + _FEAS_SLACK)
    log = 0.0
    prev_heading = None
    for a, b in zip(pts, pts[1:]):
        dx, dy = b.x - a.x, b.y - a.y
        r = math.hypot(dx, dy)
        if r > limit:
            return -math.inf
        log -= math.log(cfg.v_max)
        if r <= _STEP_EPS:
            continue
        heading = math.atan2(dy, dx)
        if prev_heading is None:
            log -= math.log(_TWO_PI)
        else:
            dth = _wrap_angle(heading - prev_heading)
            if cfg.sigma_theta == 0.0:
                if abs(dth) > _ANGLE_TOL:
                    return -math.inf
            else:
                log += -0.5 * (dth / cfg.sigma_theta) ** 2 \
                       - math.log(cfg.sigma_theta) - 0.5 * math.log(_TWO_PI)
        prev_heading = heading
    return log


def robot_prior_density(traj: Trajectory, cfg: ModelConfig) -> float:
    log = robot_prior_log_density(traj, cfg)
    return math.exp(log) if log > -math.inf else 0.0


def batch_robot_prior_log_density(pts: np.ndarray, dt: float, cfg: ModelConfig) -> np.ndarray:
    """Vectorized robot_prior_log_density over points (n, horizon, 2)."""
    n, horizon = pts.shape[0], pts.shape[1]
    if horizon < 2:
        return np.zeros(n)
    d = np.diff(pts, axis=1)
    r = np.hypot(d[..., 0], d[..., 1])
    if cfg.v_max == 0.0:
        return np.where((r <= _STEP_EPS).all(axis=1), 0.0, -np.inf)
    limit = cfg.v_max * dt * (1.0 + _FEAS_SLACK)
    out = np.where((r <= limit).all(axis=1), -(horizon - 1) * math.log(cfg.v_max), -np.inf)
    prev = np.full(n, np.nan)
    for t in range(horizon - 1):
        moving = r[:, t] > _STEP_EPS
        heading = np.arctan2(d[:, t, 1], d[:, t, 0])
        first = moving & np.isnan(prev)
        later = moving & ~np.isnan(prev)
        contrib = np.zeros(n)
        contrib[first] = -math.log(_TWO_PI)
        if later.any():
            dth = np.arctan2(np.sin(heading[later] - prev[later]),
                             np.cos(heading[later] - prev[later]))
            if cfg.sigma_theta == 0.0:
                bad = np.abs(dth) > _ANGLE_TOL
                vals = np.where(bad, -np.inf, 0.0)
            else:
                vals = (-0.5 * (dth / cfg.sigma_theta) ** 2
                        - math.log(cfg.sigma_theta) - 0.5 * math.log(_TWO_PI))
            contrib[later] = vals
        out = out + contrib
        prev = np.where(moving, heading, prev)
    return out


# --- crowd draws and densities ---------------------------------------------

def crowd_dims(belief: CrowdBelief) -> int:
    """Uniform-block columns one crowd draw consumes."""
    return 2 * len(belief.agents) * belief.horizon()


def crowd_mean_points(belief: CrowdBelief) -> np.ndarray:
    """Anchored mean paths as an (agents, horizon + 1, 2) array."""
    return np.array([b.anchored_mean().xy() for b in belief.agents], dtype=float)


def crowd_draws_from_uniforms(belief: CrowdBelief, u: np.ndarray) -> np.ndarray:
    """Map per-draw uniforms (n, crowd_dims) to anchored crowd trajectories
    (n, agents, horizon + 1, 2); the anchor point carries no noise."""
    n = u.shape[0]
    agents = len(belief.agents)
    if agents == 0:
        return np.zeros((n, 0, 1, 2))
    horizon = belief.horizon()
    u = np.clip(u, _U_CLIP, 1.0 - _U_CLIP).reshape(n, agents, horizon, 2)
    noise = ndtri(u)
    means = crowd_mean_points(belief)               # (agents, horizon + 1, 2)
    stds = np.array([b.stds for b in belief.agents])  # (agents, horizon)
    draws = np.empty((n, agents, horizon + 1, 2))
    draws[:, :, 0, :] = means[None, :, 0, :]
    draws[:, :, 1:, :] = means[None, :, 1:, :] + noise * stds[None, :, :, None]
    return draws


def crowd_log_density(belief: CrowdBelief, draws: np.ndarray) -> np.ndarray:
    """Log density of anchored draws (n, agents, horizon + 1, 2) under the
    belief; the pinned anchor contributes nothing. Empty belief -> zeros."""
    n = draws.shape[0]
    if belief.is_empty():
        return np.zeros(n)
    means = crowd_mean_points(belief)
    stds = np.array([b.stds for b in belief.agents])
    dev = draws[:, :, 1:, :] - means[None, :, 1:, :]
    var = stds[None, :, :] ** 2
    per_tick = -np.sum(dev ** 2, axis=3) / (2.0 * var) \
               - np.log(_TWO_PI * var)
    return per_tick.sum(axis=(1, 2))
