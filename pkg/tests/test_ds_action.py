from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from nudgesim.ds_action import (
    DSAction,
    DynamicsRanges,
    SpeedCap,
    WorkspaceBounds,
    reference_velocity,
    reference_velocity_arrays,
    sample_uniform_action,
)
from nudgesim.pose_math import (
    Pose,
    integrate_pose,
    quat_angle_between,
    quat_from_axis_angle,
    quat_multiply,
)


def test_dynamics_must_be_negative():
    with pytest.raises(ValueError):
        DSAction(Pose.identity(), np.array([-0.5, -0.5, 0.1, -0.7, -0.7, -0.7]))


def test_equilibrium_velocity_is_zero():
    attractor = Pose([0.4, 0.1, 0.2], quat_from_axis_angle([0, 1, 0], 0.3))
    action = DSAction(attractor)
    tw = reference_velocity(action, attractor)
    np.testing.assert_allclose(tw.to_array(), np.zeros(6), atol=1e-12)


def test_single_axis_linear_case():
    action = DSAction(Pose.identity(), np.array([-0.5] * 3 + [-0.75] * 3))
    tw = reference_velocity(action, Pose([1.0, 0, 0]))
    np.testing.assert_allclose(tw.linear, [-0.5, 0, 0], atol=1e-12)
    np.testing.assert_allclose(tw.angular, 0, atol=1e-12)


def test_rotational_case_matches_numeric_oracle():
    # derived: -0.6 * log of a pi/3 rotation about z, oracle computed with
    # scipy's rotation log
    g = Pose([0, 0, 0])
    x = Pose([0, 0, 0], quat_from_axis_angle([0, 0, 1], np.pi / 3))
    action = DSAction(g, np.array([-0.5] * 3 + [-0.6] * 3))
    tw = reference_velocity(action, x)
    oracle = -0.6 * Rotation.from_quat([*x.orientation[1:], x.orientation[0]]).as_rotvec()
    np.testing.assert_allclose(tw.angular, oracle, atol=1e-9)
    np.testing.assert_allclose(tw.angular, [0, 0, -0.6 * np.pi / 3], atol=1e-9)


def test_speed_caps_preserve_direction():
    action = DSAction(Pose.identity(), np.full(6, -0.5), SpeedCap(0.5, 1.5))
    tw = reference_velocity(action, Pose([10.0, 0, 0]))
    assert np.linalg.norm(tw.linear) == pytest.approx(0.5)
    assert tw.linear[0] < 0


def test_scaling_monotonicity_pre_clamp():
    x = Pose([0.3, -0.2, 0.1])
    cap = SpeedCap(1e6, 1e6)  # disable clamping
    weak = DSAction(Pose.identity(), np.array([-0.4] * 3 + [-0.6] * 3), cap)
    strong = DSAction(Pose.identity(), np.array([-0.6] * 3 + [-0.9] * 3), cap)
    vw = np.abs(reference_velocity(weak, x).linear)
    vs = np.abs(reference_velocity(strong, x).linear)
    assert np.all(vs >= vw)


def test_batched_matches_scalar_path():
    rng = np.random.default_rng(5)
    x = Pose(rng.normal(size=3), quat_from_axis_angle([0, 0, 1], 0.4))
    goals = [Pose(rng.normal(size=3), quat_from_axis_angle([1, 0, 0], a)) for a in (0.1, 0.9, 2.0)]
    dyn = np.stack([DynamicsRanges().sample(rng) for _ in goals])
    cap = SpeedCap()
    batched = reference_velocity_arrays(
        x.position,
        x.orientation,
        np.stack([g.position for g in goals]),
        np.stack([g.orientation for g in goals]),
        dyn,
        cap,
    )
    for i, g in enumerate(goals):
        tw = reference_velocity(DSAction(g, dyn[i], cap), x)
        np.testing.assert_allclose(batched[i], tw.to_array(), atol=1e-12)


class TestSampling:
    def test_degenerate_range_is_exact(self):
        rng = np.random.default_rng(0)
        ranges = DynamicsRanges((-0.5, -0.5), (-0.7, -0.7))
        action = sample_uniform_action(Pose.identity(), rng, ranges)
        np.testing.assert_allclose(action.dynamics, [-0.5] * 3 + [-0.7] * 3)

    def test_attractor_kept_exactly(self):
        rng = np.random.default_rng(1)
        target = Pose([0.3, 0.4, 0.5], quat_from_axis_angle([0, 1, 0], 1.0))
        action = sample_uniform_action(target, rng)
        assert action.attractor is target

    def test_law_of_large_numbers_mean(self):
        # derived: mean of U(-0.6, -0.4) is -0.5; 1e4 samples keep the
        # empirical mean within +-0.01
        rng = np.random.default_rng(42)
        ranges = DynamicsRanges()
        samples = np.stack([ranges.sample(rng) for _ in range(10_000)])
        assert abs(samples[:, :3].mean() + 0.5) < 0.01
        assert abs(samples[:, 3:].mean() + 0.75) < 0.01

    def test_samples_stay_in_ranges(self):
        rng = np.random.default_rng(2)
        ranges = DynamicsRanges()
        for _ in range(200):
            d = ranges.sample(rng)
            assert np.all(d[:3] >= -0.6) and np.all(d[:3] <= -0.4)
            assert np.all(d[3:] >= -0.9) and np.all(d[3:] <= -0.6)


def test_workspace_bounds_validation_and_sampling():
    with pytest.raises(ValueError):
        WorkspaceBounds(lo=np.array([1, 0, 0]), hi=np.array([0, 1, 1]))
    rng = np.random.default_rng(9)
    ws = WorkspaceBounds()
    for _ in range(100):
        assert ws.contains(ws.sample(rng))


def test_convergence_from_workspace_poses():
    # exponential convergence of the stable linear DS, integrated open-loop
    # at 5 ms steps
    rng = np.random.default_rng(17)
    ws = WorkspaceBounds(np.array([-0.5, -0.5, 0.0]), np.array([0.5, 0.5, 1.0]))
    attractor = Pose([0.1, -0.2, 0.5], quat_from_axis_angle([0, 0, 1], 0.5))
    action = DSAction(attractor, DynamicsRanges().midpoint())
    dt = 0.005
    for _ in range(5):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        x = Pose(ws.sample(rng), quat_multiply(quat_from_axis_angle(axis, rng.uniform(0, 3.0)), attractor.orientation))
        converged = False
        for step in range(int(60.0 / dt)):
            tw = reference_velocity(action, x)
            x = integrate_pose(x, tw, dt)
            if step % 200 == 0:
                if (
                    np.linalg.norm(x.position - attractor.position) < 1e-3
                    and quat_angle_between(x.orientation, attractor.orientation) < 1e-2
                ):
                    converged = True
                    break
        assert converged


def test_equilibrium_unique_to_attractor():
    rng = np.random.default_rng(31)
    attractor = Pose([0.2, -0.1, 0.4], quat_from_axis_angle([0, 1, 0], 0.5))
    action = DSAction(attractor, DynamicsRanges().midpoint())
    assert np.allclose(reference_velocity(action, attractor).to_array(), 0.0)
    for _ in range(50):
        x = Pose(attractor.position + rng.normal(scale=0.2, size=3), attractor.orientation)
        if np.linalg.norm(x.position - attractor.position) < 1e-6:
            continue
        assert np.linalg.norm(reference_velocity(action, x).to_array()) > 1e-7
