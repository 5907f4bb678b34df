"""MAP inference over the plan mixture and extraction of the next action.

The mixture has finite support, so inference marginalizes it exactly: robot
trajectories are sampled (or enumerated), scored against every component,
and the argmax assignment returned. All samplers are deterministic given
their seed; ties break toward the lower component index, then the earlier
sample / lexicographically smaller action sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PlannerConfig
from .errors import AlignmentError, EmptyDistribution, InstanceTooLarge, TooShort
from .global_planner import GlobalPlanDistribution
from .local_models import (
    CrowdBelief,
    RobotState,
    batch_robot_prior_log_density,
    crowd_dims,
    crowd_draws_from_uniforms,
    crowd_log_density,
    crowd_mean_points,
    primitive_dims,
    primitives_from_uniforms,
)
from .potentials import batch_crowd_interaction_log, batch_plan_agreement_log
from .trajectory import Pose, Trajectory, window_plan

_TWO_PI = 2.0 * math.pi
_BRUTE_BUDGET = 1_000_000


@dataclass(frozen=True)
class MapAssignment:
    """Argmax of the joint: chosen component, robot trajectory, crowd draw."""

    component_index: int
    fR_star: Trajectory
    crowd_star: tuple[Trajectory, ...]
    density: float


@dataclass(frozen=True)
class ComponentMass:
    """Density statistics of one mixture component over the evaluated set."""

    index: int
    max_density: float
    mean_density: float


@dataclass(frozen=True)
class InferenceReport:
    assignment: MapAssignment
    per_component_mass: tuple[ComponentMass, ...]
    samples_used: int
    seed: int
    # per-(component, sample) joint densities; populated by importance sampling
    sample_densities: tuple[tuple[float, ...], ...] | None = None
    # up to 50 thinned robot samples with their posterior mass, for telemetry
    sample_summary: tuple[tuple[Trajectory, float], ...] = ()
    acceptance_rate: float | None = None


def component_windows(dist: GlobalPlanDistribution, pose: Pose, horizon: int,
                      dt: float, speed: float) -> list[Trajectory]:
    """Window every component plan at the robot's projected progress."""
    return [window_plan(plan, pose, horizon, dt, speed) for plan in dist.plans()]


def _check_belief(belief: CrowdBelief, horizon: int) -> None:
    if not belief.is_empty() and belief.horizon() != horizon - 1:
        raise AlignmentError(
            f"belief horizon {belief.horizon()} must be horizon - 1 = {horizon - 1}")


def _crowd_trajectories(draw: np.ndarray, dt: float) -> tuple[Trajectory, ...]:
    return tuple(Trajectory.from_xy(draw[a], dt=dt) for a in range(draw.shape[0]))


def importance_sample_map(dist: GlobalPlanDistribution, robot_state: RobotState,
                          crowd_belief: CrowdBelief, n: int, seed: int,
                          cfg: PlannerConfig) -> InferenceReport:
    """Sample-and-weight MAP: draw n robot trajectories from the kinematic
    prior, pair each with one crowd draw, score the joint against every
    mixture component, and return the argmax assignment.

    Per-sample randomness occupies a fixed slice of the seeded stream, so
    sample i is identical for every n > i (enlarging n only refines).
    """
    if len(dist) == 0:
        raise EmptyDistribution("no components to infer over")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    horizon, dt = cfg.horizon, cfg.dt
    _check_belief(crowd_belief, horizon)

    rng = np.random.default_rng(seed)
    dims_r = primitive_dims(horizon)
    dims_c = crowd_dims(crowd_belief)
    u = rng.random((n, dims_r + dims_c))

    pts = primitives_from_uniforms(robot_state.pose, u[:, :dims_r], horizon, dt, cfg.models)
    draws = crowd_draws_from_uniforms(crowd_belief, u[:, dims_r:])

    log_prior_r = batch_robot_prior_log_density(pts, dt, cfg.models)
    log_prior_c = crowd_log_density(crowd_belief, draws)
    log_crowd = batch_crowd_interaction_log(pts, draws, cfg.potentials.alpha,
                                            cfg.potentials.sigma_r)
    shared = log_prior_r + log_prior_c + log_crowd

    windows = component_windows(dist, robot_state.pose, horizon, dt, cfg.models.v_max)
    weights = dist.weights()
    log_dens = np.empty((len(dist), n))
    for c, win in enumerate(windows):
        log_plan = batch_plan_agreement_log(win.xy(), pts, cfg.potentials.h)
        log_dens[c] = math.log(weights[c]) + log_plan + shared

    flat = int(np.argmax(log_dens))
    c_star, i_star = divmod(flat, n)
    densities = np.exp(log_dens)

    assignment = MapAssignment(
        component_index=c_star,
        fR_star=Trajectory.from_xy(pts[i_star], dt=dt),
        crowd_star=_crowd_trajectories(draws[i_star], dt),
        density=float(densities[c_star, i_star]),
    )
    mass = tuple(ComponentMass(c, float(densities[c].max()), float(densities[c].mean()))
                 for c in range(len(dist)))
    posterior = densities.sum(axis=0)
    thin = np.unique(np.linspace(0, n - 1, min(50, n)).astype(int))
    summary = tuple((Trajectory.from_xy(pts[i], dt=dt), float(posterior[i])) for i in thin)
    return InferenceReport(
        assignment=assignment,
        per_component_mass=mass,
        samples_used=n,
        seed=seed,
        sample_densities=tuple(tuple(float(v) for v in row) for row in densities),
        sample_summary=summary,
    )


# --- exhaustive oracle -------------------------------------------------------

@dataclass(frozen=True)
class DiscreteInstance:
    """Finite per-tick action set for exhaustive enumeration.

    Trajectories apply `horizon` actions from the current pose, giving
    horizon + 1 points.
    """

    actions: tuple[tuple[float, float], ...]
    horizon: int

    def __post_init__(self):
        if not self.actions:
            raise ValueError("instance needs at least one action")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "actions",
                           tuple((float(vx), float(vy)) for vx, vy in self.actions))

    def joint_states(self, n_components: int) -> int:
        return len(self.actions) ** self.horizon * n_components


def _enumerate_discrete(dist, robot_state, crowd_belief, instance, cfg):
    """Evaluate every (component, action sequence) pair; crowd at its mean."""
    if len(dist) == 0:
        raise EmptyDistribution("no components to infer over")
    if instance.joint_states(len(dist)) > _BRUTE_BUDGET:
        raise InstanceTooLarge(
            f"{instance.joint_states(len(dist))} joint states exceed {_BRUTE_BUDGET}")
    steps = instance.horizon
    horizon = steps + 1
    dt = cfg.dt
    _check_belief(crowd_belief, horizon)

    n_actions = len(instance.actions)
    grids = np.meshgrid(*([np.arange(n_actions)] * steps), indexing="ij")
    seq_idx = np.stack(grids, axis=-1).reshape(-1, steps)   # lexicographic rows
    actions = np.asarray(instance.actions)
    vels = actions[seq_idx]                                  # (S, steps, 2)
    n_seq = vels.shape[0]
    pts = np.empty((n_seq, horizon, 2))
    pts[:, 0, 0] = robot_state.pose.x
    pts[:, 0, 1] = robot_state.pose.y
    pts[:, 1:, :] = np.array([robot_state.pose.x, robot_state.pose.y]) \
        + np.cumsum(vels * dt, axis=1)

    mean = crowd_mean_points(crowd_belief) if not crowd_belief.is_empty() \
        else np.zeros((0, horizon, 2))
    crowd = np.broadcast_to(mean[None], (n_seq,) + mean.shape)
    log_prior_r = batch_robot_prior_log_density(pts, dt, cfg.models)
    log_prior_c = float(crowd_log_density(crowd_belief, mean[None])[0]) \
        if not crowd_belief.is_empty() else 0.0
    log_crowd = batch_crowd_interaction_log(pts, crowd, cfg.potentials.alpha,
                                            cfg.potentials.sigma_r)
    shared = log_prior_r + log_prior_c + log_crowd

    windows = component_windows(dist, robot_state.pose, horizon, dt, cfg.models.v_max)
    weights = dist.weights()
    log_dens = np.empty((len(dist), n_seq))
    for c, win in enumerate(windows):
        log_dens[c] = math.log(weights[c]) \
            + batch_plan_agreement_log(win.xy(), pts, cfg.potentials.h) + shared
    return log_dens, pts, mean


def brute_force_map(dist: GlobalPlanDistribution, robot_state: RobotState,
                    crowd_belief: CrowdBelief, instance: DiscreteInstance,
                    cfg: PlannerConfig) -> MapAssignment:
    """Exact argmax over every action sequence and component, with the crowd
    fixed at its predictive mean. Ties break to the lower component index,
    then the lexicographically smaller action-index sequence."""
    log_dens, pts, mean = _enumerate_discrete(dist, robot_state, crowd_belief,
                                              instance, cfg)
    n_seq = pts.shape[0]
    flat = int(np.argmax(log_dens))
    c_star, s_star = divmod(flat, n_seq)
    return MapAssignment(
        component_index=c_star,
        fR_star=Trajectory.from_xy(pts[s_star], dt=cfg.dt),
        crowd_star=_crowd_trajectories(mean, cfg.dt) if mean.shape[0] else (),
        density=float(math.exp(log_dens[c_star, s_star])),
    )


def brute_force_report(dist: GlobalPlanDistribution, robot_state: RobotState,
                       crowd_belief: CrowdBelief, instance: DiscreteInstance,
                       cfg: PlannerConfig, seed: int = 0) -> InferenceReport:
    """brute_force_map plus per-component statistics over the enumeration."""
    log_dens, pts, mean = _enumerate_discrete(dist, robot_state, crowd_belief,
                                              instance, cfg)
    n_seq = pts.shape[0]
    flat = int(np.argmax(log_dens))
    c_star, s_star = divmod(flat, n_seq)
    densities = np.exp(log_dens)
    assignment = MapAssignment(
        component_index=c_star,
        fR_star=Trajectory.from_xy(pts[s_star], dt=cfg.dt),
        crowd_star=_crowd_trajectories(mean, cfg.dt) if mean.shape[0] else (),
        density=float(densities[c_star, s_star]),
    )
    mass = tuple(ComponentMass(c, float(densities[c].max()), float(densities[c].mean()))
                 for c in range(len(dist)))
    posterior = densities.sum(axis=0)
    thin = np.unique(np.linspace(0, n_seq - 1, min(50, n_seq)).astype(int))
    summary = tuple((Trajectory.from_xy(pts[i], dt=cfg.dt), float(posterior[i]))
                    for i in thin)
    return InferenceReport(assignment=assignment, per_component_mass=mass,
                           samples_used=n_seq, seed=seed, sample_summary=summary)


# --- Metropolis-Hastings -----------------------------------------------------

class _ScalarEvaluator:
    """Fast joint log-density for one (component, point-list) state."""

    def __init__(self, dist, robot_state, crowd_belief, horizon, dt, cfg):
        windows = component_windows(dist, robot_state.pose, horizon, dt, cfg.models.v_max)
        self.windows = [[(p.x, p.y) for p in w.points] for w in windows]
        self.log_w = [math.log(w) for w in dist.weights()]
        mean = crowd_mean_points(crowd_belief) if not crowd_belief.is_empty() \
            else np.zeros((0, horizon, 2))
        self.crowd = [[(float(x), float(y)) for x, y in agent] for agent in mean]
        self.log_prior_c = float(crowd_log_density(crowd_belief, mean[None])[0]) \
            if not crowd_belief.is_empty() else 0.0
        self.h2 = 2.0 * cfg.potentials.h
        self.alpha = cfg.potentials.alpha
        self.inv_sr = 1.0 / (2.0 * cfg.potentials.sigma_r ** 2)
        self.dt = dt
        self.models = cfg.models
        self.limit = cfg.models.v_max * dt * (1.0 + 1e-9)

    def log_density(self, c: int, pts: list[tuple[float, float]]) -> float:
        win = self.windows[c]
        sq = 0.0
        for (x, y), (wx, wy) in zip(pts, win):
            sq += (x - wx) ** 2 + (y - wy) ** 2
        log = self.log_w[c] - sq / self.h2 + self.log_prior_c

        for agent in self.crowd:
            for (x, y), (ax, ay) in zip(pts, agent):
                d2 = (x - ax) ** 2 + (y - ay) ** 2
                log += math.log(1.0 - self.alpha * math.exp(-d2 * self.inv_sr))

        m = self.models
        if m.v_max == 0.0:
            for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
                if (x1 - x0) ** 2 + (y1 - y0) ** 2 > 1e-24:
                    return -math.inf
            return log
        prev_heading = None
        log_vmax = math.log(m.v_max)
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            dx, dy = x1 - x0, y1 - y0
            r = math.hypot(dx, dy)
            if r > self.limit:
                return -math.inf
            log -= log_vmax
            if r <= 1e-12:
                continue
            heading = math.atan2(dy, dx)
            if prev_heading is None:
                log -= math.log(_TWO_PI)
            else:
                dth = math.atan2(math.sin(heading - prev_heading),
                                 math.cos(heading - prev_heading))
                if m.sigma_theta == 0.0:
                    if abs(dth) > 1e-9:
                        return -math.inf
                else:
                    log += -0.5 * (dth / m.sigma_theta) ** 2 \
                           - math.log(m.sigma_theta) - 0.5 * math.log(_TWO_PI)
            prev_heading = heading
        return log


def _project_feasible(pts: list[tuple[float, float]], limit: float) -> list[tuple[float, float]]:
    """Clamp each step to the per-tick displacement limit, front to back."""
    out = [pts[0]]
    for x, y in pts[1:]:
        px, py = out[-1]
        dx, dy = x - px, y - py
        r = math.hypot(dx, dy)
        if r > limit:
            scale = limit / r
            dx *= scale
            dy *= scale
        out.append((px + dx, py + dy))
    return out


def mh_sample_map(dist: GlobalPlanDistribution, robot_state: RobotState,
                  crowd_belief: CrowdBelief, iterations: int, seed: int,
                  cfg: PlannerConfig, proposal_std: float | None = None,
                  init: MapAssignment | None = None,
                  switch_prob: float = 0.25) -> InferenceReport:
    """Metropolis-Hastings over (component index, robot trajectory).

    Trajectory proposals add Gaussian per-tick perturbations and project back
    to kinematic feasibility. Component proposals switch uniformly among the
    other components, carrying the trajectory's deviation pattern onto the
    new component's window (a deterministic translation with unit Jacobian,
    so min(1, density ratio) stays the correct acceptance rule); infeasible
    translations die via their zero prior. The crowd stays fixed at its
    predictive mean, and the best-visited assignment is returned.
    """
    if len(dist) == 0:
        raise EmptyDistribution("no components to infer over")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    horizon, dt = cfg.horizon, cfg.dt
    _check_belief(crowd_belief, horizon)
    if proposal_std is None:
        proposal_std = 0.5 * cfg.models.v_max * dt

    ev = _ScalarEvaluator(dist, robot_state, crowd_belief, horizon, dt, cfg)
    n_comp = len(dist)
    limit = cfg.models.v_max * dt

    if init is not None:
        c = init.component_index
        pts = [(p.x, p.y) for p in init.fR_star.points]
        if len(pts) != horizon:
            raise AlignmentError(f"init trajectory length {len(pts)} != horizon {horizon}")
    else:
        c = 0
        pts = [(robot_state.pose.x, robot_state.pose.y)] * horizon
    logp = ev.log_density(c, pts)

    rng = np.random.default_rng(seed)
    kind_u = rng.random(iterations)
    comp_u = rng.random(iterations)
    noise = rng.standard_normal((iterations, horizon - 1, 2)) * proposal_std
    accept_u = rng.random(iterations)

    best_c, best_pts, best_logp = c, list(pts), logp
    count = [0] * n_comp
    total = [0.0] * n_comp
    peak = [-math.inf] * n_comp
    accepted = 0
    keep_every = max(1, iterations // 50)
    summary: list[tuple[Trajectory, float]] = []

    for i in range(iterations):
        if n_comp > 1 and kind_u[i] < switch_prob:
            j = int(comp_u[i] * (n_comp - 1))
            cand_c = j if j < c else j + 1
            win_old, win_new = ev.windows[c], ev.windows[cand_c]
            cand_pts = [pts[0]] + [
                (pts[t][0] - win_old[t][0] + win_new[t][0],
                 pts[t][1] - win_old[t][1] + win_new[t][1])
                for t in range(1, horizon)]
        else:
            cand_c = c
            raw = [pts[0]] + [(pts[t + 1][0] + noise[i, t, 0], pts[t + 1][1] + noise[i, t, 1])
                              for t in range(horizon - 1)]
            cand_pts = _project_feasible(raw, limit)
        cand_logp = ev.log_density(cand_c, cand_pts)
        dlog = cand_logp - logp
        if dlog >= 0 or accept_u[i] < math.exp(dlog):
            c, pts, logp = cand_c, cand_pts, cand_logp
            accepted += 1
            if logp > best_logp:
                best_c, best_pts, best_logp = c, list(pts), logp
        count[c] += 1
        dens = math.exp(logp) if logp > -math.inf else 0.0
        total[c] += dens
        if dens > peak[c]:
            peak[c] = dens
        if i % keep_every == 0 and len(summary) < 50:
            summary.append((Trajectory.from_xy(np.asarray(pts), dt=dt), dens))

    mean_belief = crowd_mean_points(crowd_belief) if not crowd_belief.is_empty() \
        else np.zeros((0, horizon, 2))
    assignment = MapAssignment(
        component_index=best_c,
        fR_star=Trajectory.from_xy(np.asarray(best_pts), dt=dt),
        crowd_star=_crowd_trajectories(mean_belief, dt) if mean_belief.shape[0] else (),
        density=math.exp(best_logp) if best_logp > -math.inf else 0.0,
    )
    mass = tuple(ComponentMass(k,
                               peak[k] if count[k] else 0.0,
                               total[k] / count[k] if count[k] else 0.0)
                 for k in range(n_comp))
    return InferenceReport(
        assignment=assignment,
        per_component_mass=mass,
        samples_used=iterations,
        seed=seed,
        sample_summary=tuple(summary),
        acceptance_rate=accepted / iterations,
    )


def next_action(report: InferenceReport, v_max: float) -> tuple[float, float]:
    """First-step velocity of the MAP trajectory, clamped to v_max."""
    traj = report.assignment.fR_star
    if len(traj.points) < 2:
        raise TooShort("next_action needs a trajectory with at least 2 points")
    p0, p1 = traj.points[0], traj.points[1]
    vx = (p1.x - p0.x) / traj.dt
    vy = (p1.y - p0.y) / traj.dt
    speed = math.hypot(vx, vy)
    if speed > v_max and speed > 0:
        scale = v_max / speed
        vx *= scale
        vy *= scale
    return vx, vy
