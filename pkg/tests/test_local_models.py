import math

import numpy as np
import pytest

from navmix.config import ModelConfig
from navmix.local_models import (
    AgentTrack,
    CrowdBelief,
    RobotState,
    batch_robot_prior_log_density,
    crowd_draws_from_uniforms,
    crowd_log_density,
    predict_crowd,
    robot_prior_density,
    robot_prior_log_density,
    sample_robot_prior,
    visible_tracks,
)
from navmix.trajectory import Pose, Trajectory


def track(agent_id, *obs):
    return AgentTrack(agent_id, tuple((t, Pose(x, y)) for t, x, y in obs))


class TestRobotPriorSampling:
    def test_zero_vmax_is_stationary(self):
        cfg = ModelConfig(v_max=0.0)
        rng = np.random.default_rng(0)
        state = RobotState(pose=Pose(2.0, -1.0))
        for traj in sample_robot_prior(state, 20, 5, 0.5, cfg, rng):
            assert all(p == Pose(2.0, -1.0) for p in traj.points)

    def test_noiseless_straight_line(self):
        # with sigma_theta = 0 every sample is a straight constant-speed ray
        cfg = ModelConfig(v_max=1.0, sigma_theta=0.0)
        rng = np.random.default_rng(1)
        state = RobotState(pose=Pose(0.0, 0.0))
        for traj in sample_robot_prior(state, 50, 3, 1.0, cfg, rng):
            p0, p1, p2 = traj.points
            assert p2.x - p1.x == pytest.approx(p1.x - p0.x, abs=1e-12)
            assert p2.y - p1.y == pytest.approx(p1.y - p0.y, abs=1e-12)

    def test_every_sample_feasible(self):
        cfg = ModelConfig(v_max=1.3, sigma_theta=0.6)
        rng = np.random.default_rng(2)
        state = RobotState(pose=Pose(1.0, 1.0), velocity=(0.2, 0.0))
        samples = sample_robot_prior(state, 1000, 7, 0.25, cfg, rng)
        assert all(t.is_kinematically_feasible(cfg.v_max) for t in samples)
        assert all(t.points[0] == state.pose for t in samples)

    def test_deterministic_given_seed(self):
        cfg = ModelConfig()
        state = RobotState(pose=Pose(0, 0))
        a = sample_robot_prior(state, 5, 4, 0.5, cfg, np.random.default_rng(9))
        b = sample_robot_prior(state, 5, 4, 0.5, cfg, np.random.default_rng(9))
        assert a == b


class TestRobotPriorDensity:
    def test_infeasible_is_zero(self):
        cfg = ModelConfig(v_max=1.0)
        fast = Trajectory((Pose(0, 0), Pose(3, 0)), dt=1.0)
        assert robot_prior_density(fast, cfg) == 0.0

    def test_straight_line_value(self):
        cfg = ModelConfig(v_max=2.0, sigma_theta=0.5)
        traj = Trajectory((Pose(0, 0), Pose(1, 0), Pose(2, 0)), dt=1.0)
        expected = (1 / 2.0) ** 2 * (1 / (2 * math.pi)) \
            * (1 / (0.5 * math.sqrt(2 * math.pi)))
        assert robot_prior_density(traj, cfg) == pytest.approx(expected, rel=1e-12)

    def test_stationary_has_positive_density(self):
        cfg = ModelConfig(v_max=1.0)
        hold = Trajectory((Pose(0, 0),) * 4, dt=1.0)
        assert robot_prior_density(hold, cfg) > 0

    def test_batch_matches_scalar(self):
        cfg = ModelConfig(v_max=1.0, sigma_theta=0.35)
        rng = np.random.default_rng(3)
        state = RobotState(pose=Pose(0, 0))
        samples = sample_robot_prior(state, 64, 6, 0.25, cfg, rng)
        pts = np.stack([t.xy() for t in samples])
        batch = batch_robot_prior_log_density(pts, 0.25, cfg)
        scalar = np.array([robot_prior_log_density(t, cfg) for t in samples])
        assert np.allclose(batch, scalar, rtol=1e-12, atol=1e-12)


class TestPredictCrowd:
    def test_stationary_agent(self):
        belief = predict_crowd([track(0, (0.0, 1.0, 2.0), (1.0, 1.0, 2.0))],
                               3, 1.0, ModelConfig())
        mean = belief.agents[0].mean
        assert all(p == Pose(1.0, 2.0) for p in mean.points)

    def test_constant_velocity_extrapolation(self):
        belief = predict_crowd([track(0, (0.0, 0.0, 0.0), (1.0, 1.0, 0.0))],
                               3, 1.0, ModelConfig())
        mean = belief.agents[0].mean
        assert [(p.x, p.y) for p in mean.points] == [(2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]

    def test_std_growth(self):
        cfg = ModelConfig(sigma0=0.1, sigma_g=0.05)
        belief = predict_crowd([track(0, (0.0, 0.0, 0.0))], 4, 1.0, cfg)
        assert belief.agents[0].stds[3] == pytest.approx(0.3)
        stds = belief.agents[0].stds
        assert all(b > a for a, b in zip(stds, stds[1:]))

    def test_single_observation_stationary(self):
        belief = predict_crowd([track(7, (0.0, 5.0, 5.0))], 2, 0.5, ModelConfig())
        assert all(p == Pose(5.0, 5.0) for p in belief.agents[0].mean.points)

    def test_empty_tracks_empty_belief(self):
        belief = predict_crowd([], 3, 1.0, ModelConfig())
        assert belief.is_empty()

    def test_exact_on_noiseless_tracks_any_horizon(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            vx, vy = rng.uniform(-2, 2, size=2)
            x0, y0 = rng.uniform(-5, 5, size=2)
            dt = float(rng.uniform(0.1, 1.0))
            obs = [(k * dt, x0 + vx * k * dt, y0 + vy * k * dt) for k in range(4)]
            horizon = int(rng.integers(1, 9))
            belief = predict_crowd([track(0, *obs)], horizon, dt, ModelConfig())
            for k, p in enumerate(belief.agents[0].mean.points, start=1):
                t = (3 + k) * dt
                assert p.x == pytest.approx(x0 + vx * t, abs=1e-9)
                assert p.y == pytest.approx(y0 + vy * t, abs=1e-9)


class TestVisibleTracks:
    def test_all_outside_radius(self):
        tracks = [track(0, (0.0, 10.0, 0.0)), track(1, (0.0, 0.0, 9.0))]
        assert visible_tracks(tracks, Pose(0, 0), 5.0) == []

    def test_infinite_radius_keeps_all(self):
        tracks = [track(0, (0.0, 100.0, 0.0)), track(1, (0.0, 0.0, -50.0))]
        assert visible_tracks(tracks, Pose(0, 0), math.inf) == tracks

    def test_boundary_is_closed(self):
        tracks = [track(0, (0.0, 3.0, 4.0))]
        assert visible_tracks(tracks, Pose(0, 0), 5.0) == tracks

    def test_zero_radius(self):
        tracks = [track(0, (0.0, 0.0, 0.0)), track(1, (0.0, 0.1, 0.0))]
        assert visible_tracks(tracks, Pose(0, 0), 0.0) == tracks[:1]

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(8)
        tracks = [track(i, (0.0, float(x), float(y)))
                  for i, (x, y) in enumerate(rng.uniform(-10, 10, size=(20, 2)))]
        r1, r2 = sorted(rng.uniform(0, 15, size=2))
        inner = {t.agent_id for t in visible_tracks(tracks, Pose(0, 0), r1)}
        outer = {t.agent_id for t in visible_tracks(tracks, Pose(0, 0), r2)}
        assert inner <= outer


class TestCrowdDraws:
    def test_anchor_is_noise_free(self):
        belief = predict_crowd([track(0, (0.0, 1.0, 1.0), (1.0, 2.0, 1.0))],
                               3, 1.0, ModelConfig())
        u = np.random.default_rng(0).random((16, 2 * 1 * 3))
        draws = crowd_draws_from_uniforms(belief, u)
        assert draws.shape == (16, 1, 4, 2)
        assert np.all(draws[:, 0, 0, :] == np.array([2.0, 1.0]))

    def test_log_density_peaks_at_mean(self):
        belief = predict_crowd([track(0, (0.0, 0.0, 0.0), (1.0, 1.0, 0.0))],
                               2, 1.0, ModelConfig())
        mean = np.stack([b.anchored_mean().xy() for b in belief.agents])[None]
        off = mean.copy()
        off[0, 0, 1:, 0] += 0.5
        assert crowd_log_density(belief, mean)[0] > crowd_log_density(belief, off)[0]

    def test_empty_belief_zero_logdensity(self):
        belief = CrowdBelief()
        assert crowd_log_density(belief, np.zeros((3, 0, 1, 2))).tolist() == [0, 0, 0]


class TestAgentTrack:
    def test_requires_observation(self):
        with pytest.raises(ValueError):
            AgentTrack(0, ())

    def test_strictly_increasing_timestamps(self):
        with pytest.raises(ValueError):
            track(0, (1.0, 0.0, 0.0), (1.0, 1.0, 0.0))
