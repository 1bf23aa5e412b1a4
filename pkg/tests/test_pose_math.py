from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from nudgesim.pose_math import (
    Pose,
    Twist,
    integrate_pose,
    pose_difference,
    quat_angle_between,
    quat_exp,
    quat_from_axis_angle,
    quat_log,
    quat_multiply,
    quat_normalize,
)


def oracle_rotvec(q_wxyz) -> np.ndarray:
    """Independent rotation-vector via scipy's matrix-backed implementation."""
    w, x, y, z = q_wxyz
    return Rotation.from_quat([x, y, z, w]).as_rotvec()


def random_unit_quat(rng, max_angle=np.pi - 1e-3):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(1e-6, max_angle)
    return quat_from_axis_angle(axis, angle)


class TestQuaternions:
    def test_normalize_canonicalizes_sign(self):
        q = quat_normalize([-0.5, 0.5, 0.5, 0.5])
        assert q[0] >= 0
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)

    def test_normalize_rejects_zero(self):
        with pytest.raises(ValueError):
            quat_normalize([0.0, 0.0, 0.0, 0.0])

    def test_log_matches_matrix_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            q = random_unit_quat(rng)
            np.testing.assert_allclose(quat_log(q), oracle_rotvec(q), atol=1e-9)

    def test_exp_log_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            q = random_unit_quat(rng)
            q2 = quat_exp(quat_log(q))
            np.testing.assert_allclose(q2, q, atol=1e-9)

    def test_multiply_matches_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            a = random_unit_quat(rng)
            b = random_unit_quat(rng)
            ours = quat_multiply(a, b)
            ra = Rotation.from_quat([a[1], a[2], a[3], a[0]])
            rb = Rotation.from_quat([b[1], b[2], b[3], b[0]])
            theirs = (ra * rb).as_quat()  # xyzw
            theirs = np.array([theirs[3], theirs[0], theirs[1], theirs[2]])
            if theirs[0] < 0:
                theirs = -theirs
            np.testing.assert_allclose(quat_normalize(ours), theirs, atol=1e-9)

    def test_near_pi_angle_is_clamped_not_nan(self):
        q = quat_from_axis_angle([0, 0, 1], np.pi)
        rv = quat_log(q)
        assert np.all(np.isfinite(rv))
        assert np.linalg.norm(rv) <= np.pi


class TestPoseTypes:
    def test_pose_normalizes_orientation(self):
        p = Pose([0, 0, 0], [2.0, 0, 0, 0])
        np.testing.assert_allclose(p.orientation, [1, 0, 0, 0])

    def test_pose_rejects_nan(self):
        with pytest.raises(ValueError):
            Pose([np.nan, 0, 0])

    def test_twist_rejects_inf(self):
        with pytest.raises(ValueError):
            Twist([np.inf, 0, 0], [0, 0, 0])

    def test_pose_array_round_trip(self):
        p = Pose([1, 2, 3], quat_from_axis_angle([1, 0, 0], 0.3))
        np.testing.assert_allclose(Pose.from_array(p.to_array()).to_array(), p.to_array())


class TestPoseDifference:
    def test_identity_case(self):
        g = Pose([0.3, -0.2, 0.5], quat_from_axis_angle([0, 1, 0], 0.4))
        np.testing.assert_allclose(pose_difference(g, g), np.zeros(6), atol=1e-12)

    def test_pure_translation(self):
        g = Pose([0, 0, 0])
        x = Pose([1, 0, 0])
        np.testing.assert_allclose(pose_difference(x, g), [1, 0, 0, 0, 0, 0], atol=1e-12)

    def test_pure_rotation_half_pi_about_z(self):
        # derived: relative rotation pi/2 about z, verified against the
        # matrix-log oracle
        g = Pose([0.1, 0.2, 0.3], quat_from_axis_angle([0, 0, 1], 0.2))
        x = Pose([0.1, 0.2, 0.3], quat_multiply(quat_from_axis_angle([0, 0, 1], np.pi / 2), g.orientation))
        d = pose_difference(x, g)
        np.testing.assert_allclose(d[:3], 0, atol=1e-12)
        rel = quat_multiply(x.orientation, [g.orientation[0], *(-g.orientation[1:])])
        np.testing.assert_allclose(d[3:], oracle_rotvec(rel), atol=1e-9)
        np.testing.assert_allclose(d[3:], [0, 0, np.pi / 2], atol=1e-9)

    def test_positional_antisymmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = Pose(rng.normal(size=3), random_unit_quat(rng))
            g = Pose(rng.normal(size=3), random_unit_quat(rng))
            np.testing.assert_allclose(
                pose_difference(x, g)[:3], -pose_difference(g, x)[:3], atol=1e-12
            )


class TestIntegratePose:
    def test_zero_twist_is_identity(self):
        x = Pose([1, 2, 3], quat_from_axis_angle([0, 0, 1], 0.7))
        out = integrate_pose(x, Twist.zero(), 0.01)
        np.testing.assert_allclose(out.to_array(), x.to_array(), atol=1e-12)

    def test_linear_translation(self):
        out = integrate_pose(Pose.identity(), Twist([1, 0, 0], [0, 0, 0]), 0.5)
        np.testing.assert_allclose(out.position, [0.5, 0, 0], atol=1e-12)

    def test_two_half_turns_return_to_start(self):
        # derived: two exp-map compositions of pi about z complete 2*pi
        x = Pose([0, 0, 0], quat_from_axis_angle([1, 0, 0], 0.3))
        tw = Twist([0, 0, 0], [0, 0, np.pi])
        out = integrate_pose(integrate_pose(x, tw, 1.0), tw, 1.0)
        assert quat_angle_between(out.orientation, x.orientation) < 1e-9

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            integrate_pose(Pose.identity(), Twist.zero(), 0.0)

    def test_small_step_descends_toward_goal(self):
        # moving along -k * d shrinks the pose difference, the property the
        # DS controller relies on
        rng = np.random.default_rng(21)
        for _ in range(30):
            x = Pose(rng.normal(size=3), random_unit_quat(rng, 2.5))
            g = Pose(rng.normal(size=3), random_unit_quat(rng, 2.5))
            d = pose_difference(x, g)
            tw = Twist(-0.5 * d[:3], -0.5 * d[3:])
            x2 = integrate_pose(x, tw, 0.01)
            assert np.linalg.norm(pose_difference(x2, g)) < np.linalg.norm(d)
