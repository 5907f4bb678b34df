"""Coupling functions and the unnormalized joint density.

Plan agreement is a squared-exponential in the summed squared deviation;
crowd interaction is a per-tick product repulsion bounded in (0, 1]. All
densities here are unnormalized: only argmax and ratios carry meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PotentialConfig
from .errors import AlignmentError, MissingBandwidth, NonpositiveWeight
from .global_planner import GlobalPlanDistribution
from .trajectory import Trajectory, squared_deviation


@dataclass(frozen=True)
class HierarchyLevels:
    """Plan distributions from mission level down through tactical levels.

    Each entry is (distribution, evidence_tag); adjacent levels must share a
    time base by the time their chosen plans reach chain_density.
    """

    levels: tuple[tuple[GlobalPlanDistribution, str], ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ValueError("a hierarchy needs at least one level")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)


def plan_agreement(eta: Trajectory, f_r: Trajectory, h: float) -> float:
    """exp(-squared_deviation / (2h)): 1 at coincidence, strictly decreasing
    in deviation. h may be math.inf to disable the coupling."""
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    return math.exp(-squared_deviation(eta, f_r) / (2.0 * h))


def crowd_interaction(f_r: Trajectory, crowd, alpha: float, sigma_r: float) -> float:
    """Product repulsion: prod over agents and ticks of
    1 - alpha * exp(-dist^2 / (2 sigma_r^2)), in (0, 1]; 1 for an empty crowd."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not sigma_r > 0:
        raise ValueError(f"sigma_r must be > 0, got {sigma_r}")
    inv = 1.0 / (2.0 * sigma_r * sigma_r)
    value = 1.0
    for agent in crowd:
        if len(agent.points) != len(f_r.points):
            raise AlignmentError(
                f"agent length {len(agent.points)} != robot length {len(f_r.points)}")
        for p, q in zip(f_r.points, agent.points):
            d2 = (p.x - q.x) ** 2 + (p.y - q.y) ** 2
            value *= 1.0 - alpha * math.exp(-d2 * inv)
    return value


def joint_density(component: tuple[float, Trajectory], f_r: Trajectory,
                  crowd_sample, priors: tuple[float, float],
                  cfg: PotentialConfig) -> float:
    """Unnormalized joint value of one mixture component:

        w * plan_agreement(eta, f_r) * crowd_interaction(f_r, crowd)
          * prior_robot * prior_crowd

    `eta` must already be windowed/aligned to f_r's time base.
    """
    w, eta = component
    if w <= 0:
        raise NonpositiveWeight(f"component weight must be > 0, got {w}")
    prior_robot, prior_crowd = priors
    return (w
            * plan_agreement(eta, f_r, cfg.h)
            * crowd_interaction(f_r, crowd_sample, cfg.alpha, cfg.sigma_r)
            * prior_robot
            * prior_crowd)


def chain_bandwidths(cfg: PotentialConfig, n_levels: int) -> tuple[float, ...]:
    """One bandwidth per coupling: n_levels - 1 between adjacent levels plus
    one for the bottom level-to-trajectory coupling."""
    if cfg.chain_bandwidths is None:
        return (cfg.h,) * n_levels
    if len(cfg.chain_bandwidths) < n_levels:
        raise MissingBandwidth(
            f"{n_levels} couplings need {n_levels} bandwidths, "
            f"got {len(cfg.chain_bandwidths)}")
    return cfg.chain_bandwidths[:n_levels]


def chain_density(levels: HierarchyLevels, component_indices, f_r: Trajectory,
                  crowd_sample, priors: tuple[float, float],
                  cfg: PotentialConfig) -> float:
    """Unnormalized density of a full hierarchy assignment.

    component_indices picks one mixture component per level, top down. The
    value is the product of each level's weight, the agreement coupling of
    every adjacent level pair, the bottom coupling to f_r, the crowd
    interaction, and the priors. A single level reproduces joint_density
    exactly (with the default bandwidths).
    """
    indices = tuple(component_indices)
    if len(indices) != len(levels):
        raise ValueError(f"need one component index per level, got {len(indices)}")
    bw = chain_bandwidths(cfg, len(levels))
    chosen = []
    for (dist, _tag), idx in zip(levels.levels, indices):
        w, eta = dist.components[idx]
        if w <= 0:
            raise NonpositiveWeight(f"component weight must be > 0, got {w}")
        chosen.append((w, eta))

    value = 1.0
    for w, _ in chosen:
        value *= w
    for j in range(len(chosen) - 1):
        value *= plan_agreement(chosen[j][1], chosen[j + 1][1], bw[j])
    value *= plan_agreement(chosen[-1][1], f_r, bw[len(chosen) - 1])
    prior_robot, prior_crowd = priors
    value *= crowd_interaction(f_r, crowd_sample, cfg.alpha, cfg.sigma_r)
    return value * prior_robot * prior_crowd


# --- vectorized helpers used by the samplers --------------------------------

def batch_plan_agreement_log(window_xy: np.ndarray, pts: np.ndarray, h: float) -> np.ndarray:
    """log plan_agreement for points (n, horizon, 2) against one window
    (horizon, 2)."""
    dev = pts - window_xy[None, :, :]
    sq = np.einsum("nij,nij->n", dev, dev)
    return -sq / (2.0 * h)


def batch_crowd_interaction_log(pts: np.ndarray, crowd: np.ndarray,
                                alpha: float, sigma_r: float) -> np.ndarray:
    """log crowd_interaction for robot points (n, horizon, 2) against crowd
    draws (n, agents, horizon, 2); zeros when there are no agents."""
    n = pts.shape[0]
    if crowd.shape[1] == 0:
        return np.zeros(n)
    dev = pts[:, None, :, :] - crowd
    d2 = np.einsum("naij,naij->nai", dev, dev)
    factors = 1.0 - alpha * np.exp(-d2 / (2.0 * sigma_r * sigma_r))
    return np.log(factors).sum(axis=(1, 2))
