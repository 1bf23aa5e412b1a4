"""Pose, twist, and quaternion math for 6-DoF end-effector state.

Conventions, fixed repo-wide:
    - quaternions are (w, x, y, z), unit norm, scalar part canonicalized >= 0
    - twists are world-frame: linear m/s, angular rad/s (rotation-vector rate)
    - the pose difference d(x, g) is state-minus-goal, so that
      velocity = A @ d(x, g) with A negative definite flows toward g
    - rotation vectors use the shortest path, angle in [0, pi]

All quaternion helpers broadcast over leading axes; the last axis is the
component axis (matching the array layout used by the particle filter).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-9
# relative rotations are clamped just short of pi to keep the log map's
# axis well defined
_MAX_ANGLE = np.pi - 1e-6


def _as_vec(v, n: int) -> np.ndarray:
    out = np.asarray(v, dtype=float)
    if out.shape != (n,):
        raise ValueError(f"expected shape ({n},), got {out.shape}")
    return out


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize to unit length and canonicalize the scalar part >= 0."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("cannot normalize a zero quaternion")
    q = q / norm
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)
    return quat_multiply(quat_multiply(q, qv), quat_conjugate(q))[..., 1:]


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of q, shortest path, angle in [0, pi].

    Angles within ~1e-6 of pi are clamped to keep the axis finite.
    """
    q = quat_normalize(q)
    w = np.clip(q[..., 0], -1.0, 1.0)
    vec = q[..., 1:]
    vecnorm = np.linalg.norm(vec, axis=-1)
    angle = 2.0 * np.arctan2(vecnorm, w)
    angle = np.minimum(angle, _MAX_ANGLE)
    small = vecnorm < 1e-9
    scale = np.where(small, 2.0, angle / np.where(small, 1.0, vecnorm))
    return vec * scale[..., None]


def quat_exp(rv: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle)."""
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv, axis=-1)
    half = angle / 2.0
    small = angle < 1e-12
    k = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, angle))
    w = np.cos(half)
    xyz = rv * k[..., None]
    return quat_normalize(np.concatenate([w[..., None], xyz], axis=-1))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = _as_vec(axis, 3)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise ValueError("axis must be nonzero")
    return quat_exp(axis / norm * angle)


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Relative rotation angle between quaternions, in [0, pi]."""
    rel = quat_multiply(np.asarray(a, dtype=float), quat_conjugate(b))
    return np.linalg.norm(quat_log(rel), axis=-1)


@dataclass(frozen=True)
class Pose:
    """End-effector pose: position (m) + unit quaternion orientation."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = _as_vec(self.position, 3)
        q = quat_normalize(_as_vec(self.orientation, 4))
        if not np.all(np.isfinite(p)):
            raise ValueError("position must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3))

    def to_array(self) -> np.ndarray:
        """7-vector (px, py, pz, qw, qx, qy, qz)."""
        return np.concatenate([self.position, self.orientation])

    @staticmethod
    def from_array(arr) -> "Pose":
        arr = _as_vec(arr, 7)
        return Pose(arr[:3], arr[3:])

    def translated(self, offset) -> "Pose":
        return Pose(self.position + _as_vec(offset, 3), self.orientation)

    def rotated(self, quat) -> "Pose":
        """Compose a world-frame rotation onto the orientation."""
        return Pose(self.position, quat_multiply(quat, self.orientation))


@dataclass(frozen=True)
class Twist:
    """World-frame velocity: linear (m/s) + angular (rad/s)."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        lin = _as_vec(self.linear, 3)
        ang = _as_vec(self.angular, 3)
        if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(ang))):
            raise ValueError("twist components must be finite")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "angular", ang)

    @staticmethod
    def zero() -> "Twist":
        return Twist()

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @staticmethod
    def from_array(arr) -> "Twist":
        arr = _as_vec(arr, 6)
        return Twist(arr[:3], arr[3:])


def pose_difference(x: Pose, g: Pose) -> np.ndarray:
    """State-minus-goal 6-vector [p - g_p; log(q ⊗ g_q⁻¹)].

    Zero iff x equals g; the rotational part is the world-frame rotation
    vector carrying g's orientation onto x's.
    """
    dp = x.position - g.position
    drot = quat_log(quat_multiply(x.orientation, quat_conjugate(g.orientation)))
    return np.concatenate([dp, drot])


def pose_difference_arrays(
    pos: np.ndarray, quat: np.ndarray, goal_pos: np.ndarray, goal_quat: np.ndarray
) -> np.ndarray:
    """Batched pose_difference; broadcasts (..., 3)/(..., 4) inputs."""
    dp = np.asarray(pos, dtype=float) - np.asarray(goal_pos, dtype=float)
    rel = quat_multiply(np.asarray(quat, dtype=float), quat_conjugate(goal_quat))
    return np.concatenate([dp, quat_log(rel)], axis=-1)


def integrate_pose(x: Pose, twist: Twist, dt: float) -> Pose:
    """Advance a pose by a constant world-frame twist over dt seconds."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    new_pos = x.position + twist.linear * dt
    dq = quat_exp(twist.angular * dt)
    return Pose(new_pos, quat_multiply(dq, x.orientation))
