"""Configuration bundles shared by the planner stack.

Defaults follow the tuning used throughout the test scenarios; every value
can be overridden per scenario document (see simulator.load_scenario).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any


@dataclass(frozen=True)
class ModelConfig:
    """Robot kinematics, crowd prediction, and sensing parameters."""

    v_max: float = 1.0          # m/s
    sigma_theta: float = 0.3    # rad, per-tick heading jitter of the robot prior
    sigma0: float = 0.1         # m, crowd prediction noise floor
    sigma_g: float = 0.05       # m per tick, crowd noise growth
    fov_radius: float = 5.0     # m, sensing radius (closed disk)

    def __post_init__(self):
        if self.v_max < 0:
            raise ValueError(f"v_max must be >= 0, got {self.v_max}")
        if self.sigma_theta < 0:
            raise ValueError(f"sigma_theta must be >= 0, got {self.sigma_theta}")
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.sigma_g < 0 or self.fov_radius < 0:
            raise ValueError("sigma_g and fov_radius must be >= 0")


@dataclass(frozen=True)
class PotentialConfig:
    """Coupling-function parameters.

    chain_bandwidths supplies one squared-meters bandwidth per adjacent pair
    in a plan hierarchy (top-down, ending with the trajectory coupling); when
    None every coupling reuses `h`.
    """

    h: float = 0.5              # m^2, plan-agreement bandwidth
    alpha: float = 0.9          # repulsion strength, in (0, 1)
    sigma_r: float = 0.8        # m, repulsion range
    chain_bandwidths: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be > 0, got {self.h}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.sigma_r > 0:
            raise ValueError(f"sigma_r must be > 0, got {self.sigma_r}")
        if self.chain_bandwidths is not None:
            if any(not b > 0 for b in self.chain_bandwidths):
                raise ValueError("chain bandwidths must be > 0")
            object.__setattr__(self, "chain_bandwidths", tuple(self.chain_bandwidths))


@dataclass(frozen=True)
class GlobalPlanConfig:
    """Global-plan mixture parameters."""

    k: int = 3                  # candidate plans per goal
    lam: float = 0.3            # 1/m, length softmax sharpness
    rho: float = 2.0            # > 1, reuse penalty for diverse planning
    kappa: float = 2.0          # joystick-misalignment sharpness
    window: float = 1.5         # s, joystick influence window

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.rho > 1:
            raise ValueError(f"rho must be > 1, got {self.rho}")
        if self.kappa < 0 or self.window < 0:
            raise ValueError("kappa and window must be >= 0")


@dataclass(frozen=True)
class InferenceConfig:
    """Which MAP back-end the simulator runs, and with what budget."""

    method: str = "importance"      # importance | mh | brute
    samples: int = 400              # draws for importance, iterations for mh
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("importance", "mh", "brute"):
            raise ValueError(f"unknown inference method {self.method!r}")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")


@dataclass(frozen=True)
class PlannerConfig:
    """Everything a scenario needs besides the map and the scripts."""

    horizon: int = 8            # ticks per local trajectory (incl. current pose)
    dt: float = 0.25            # s per tick
    tick_limit: int = 400
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    potentials: PotentialConfig = field(default_factory=PotentialConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    global_plan: GlobalPlanConfig = field(default_factory=GlobalPlanConfig)

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError(f"horizon must be >= 2, got {self.horizon}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.tick_limit < 1:
            raise ValueError(f"tick_limit must be >= 1, got {self.tick_limit}")

    def with_overrides(self, **kwargs) -> "PlannerConfig":
        return replace(self, **kwargs)


# JSON keys use "lambda" (the math symbol) and "global"; both are reserved
# words in Python, hence the explicit key maps below.

def planner_config_from_json(doc: dict[str, Any]) -> PlannerConfig:
    """Build a PlannerConfig from the scenario document's `config` object."""
    inf = doc.get("inference", {})
    pot = doc.get("potentials", {})
    mod = doc.get("models", {})
    glo = doc.get("global", {})
    return PlannerConfig(
        horizon=doc.get("horizon", 8),
        dt=doc.get("dt", 0.25),
        tick_limit=doc.get("tick_limit", 400),
        inference=InferenceConfig(
            method=inf.get("method", "importance"),
            samples=inf.get("samples", 400),
            seed=inf.get("seed", 0),
        ),
        potentials=PotentialConfig(
            h=pot.get("h", 0.5),
            alpha=pot.get("alpha", 0.9),
            sigma_r=pot.get("sigma_r", 0.8),
        ),
        models=ModelConfig(
            v_max=mod.get("v_max", 1.0),
            sigma_theta=mod.get("sigma_theta", 0.3),
            sigma0=mod.get("sigma0", 0.1),
            sigma_g=mod.get("sigma_g", 0.05),
            fov_radius=mod.get("fov_radius", 5.0),
        ),
        global_plan=GlobalPlanConfig(
            k=glo.get("k", 3),
            lam=glo.get("lambda", 0.3),
            rho=glo.get("rho", 2.0),
            kappa=glo.get("kappa", 2.0),
            window=glo.get("window", 1.5),
        ),
    )


def planner_config_to_json(cfg: PlannerConfig) -> dict[str, Any]:
    return {
        "horizon": cfg.horizon,
        "dt": cfg.dt,
        "tick_limit": cfg.tick_limit,
        "inference": {
            "method": cfg.inference.method,
            "samples": cfg.inference.samples,
            "seed": cfg.inference.seed,
        },
        "potentials": {
            "h": cfg.potentials.h,
            "alpha": cfg.potentials.alpha,
            "sigma_r": cfg.potentials.sigma_r,
        },
        "models": {
            "v_max": cfg.models.v_max,
            "sigma_theta": cfg.models.sigma_theta,
            "sigma0": cfg.models.sigma0,
            "sigma_g": cfg.models.sigma_g,
            "fov_radius": cfg.models.fov_radius,
        },
        "global": {
            "k": cfg.global_plan.k,
            "lambda": cfg.global_plan.lam,
            "rho": cfg.global_plan.rho,
            "kappa": cfg.global_plan.kappa,
            "window": cfg.global_plan.window,
        },
    }
