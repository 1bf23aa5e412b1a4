"""Linear first-order dynamical-system actions.

A DS action drives the end effector with the reference velocity field

    twist_ref = A @ d(x, attractor)

where A is diagonal negative definite (three Cartesian and three
rotational entries) and d is the state-minus-goal pose difference.  Every
robot intent in the system, whether commanded by the language model or
estimated from human contact, is one of these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pose_math import Pose, Twist, pose_difference, pose_difference_arrays


@dataclass(frozen=True)
class DynamicsRanges:
    """Sampling intervals for the diagonal dynamics entries (1/s, negative)."""

    cartesian: tuple[float, float] = (-0.6, -0.4)
    rotational: tuple[float, float] = (-0.9, -0.6)

    def __post_init__(self):
        for lo, hi in (self.cartesian, self.rotational):
            if not (lo <= hi < 0.0):
                raise ValueError("dynamics ranges must be negative with lo <= hi")

    def midpoint(self) -> np.ndarray:
        c = 0.5 * (self.cartesian[0] + self.cartesian[1])
        r = 0.5 * (self.rotational[0] + self.rotational[1])
        return np.array([c, c, c, r, r, r])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cart = rng.uniform(self.cartesian[0], self.cartesian[1], size=3)
        rot = rng.uniform(self.rotational[0], self.rotational[1], size=3)
        return np.concatenate([cart, rot])

    def clamp(self, dynamics: np.ndarray) -> np.ndarray:
        out = np.asarray(dynamics, dtype=float).copy()
        out[..., :3] = np.clip(out[..., :3], self.cartesian[0], self.cartesian[1])
        out[..., 3:] = np.clip(out[..., 3:], self.rotational[0], self.rotational[1])
        return out


@dataclass(frozen=True)
class SpeedCap:
    """Per-block norm limit on reference velocities."""

    linear: float = 0.5
    angular: float = 1.5

    def __post_init__(self):
        if self.linear <= 0 or self.angular <= 0:
            raise ValueError("speed caps must be positive")


@dataclass(frozen=True)
class DSAction:
    """Attractor pose + diagonal negative-definite dynamics.

    `compliant` marks co-carry style entries whose attractor is meant to
    track the current pose rather than hold a fixed goal.
    """

    attractor: Pose
    dynamics: np.ndarray = field(default_factory=lambda: np.full(6, -0.5))
    speed_cap: SpeedCap = SpeedCap()
    compliant: bool = False

    def __post_init__(self):
        dyn = np.asarray(self.dynamics, dtype=float)
        if dyn.shape != (6,):
            raise ValueError(f"dynamics must be a 6-vector, got {dyn.shape}")
        if not np.all(dyn < 0.0):
            raise ValueError("all dynamics entries must be strictly negative")
        object.__setattr__(self, "dynamics", dyn)


@dataclass(frozen=True)
class WorkspaceBounds:
    """Axis-aligned box the attractors and plant live in."""

    lo: np.ndarray = field(default_factory=lambda: np.array([-1.5, -1.5, 0.0]))
    hi: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.5, 1.5]))

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
            raise ValueError("workspace bounds need lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)


def _cap_block(v: np.ndarray, cap: float) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm > cap:
        return v * (cap / norm)
    return v


def reference_velocity(action: DSAction, x: Pose) -> Twist:
    """Reference twist A @ d(x, attractor), norm-capped per block."""
    d = pose_difference(x, action.attractor)
    raw = action.dynamics * d
    return Twist(
        _cap_block(raw[:3], action.speed_cap.linear),
        _cap_block(raw[3:], action.speed_cap.angular),
    )


def reference_velocity_arrays(
    pos: np.ndarray,
    quat: np.ndarray,
    goal_pos: np.ndarray,
    goal_quat: np.ndarray,
    dynamics: np.ndarray,
    speed_cap: SpeedCap,
) -> np.ndarray:
    """Batched reference velocities, one 6-vector row per goal hypothesis."""
    d = pose_difference_arrays(pos, quat, goal_pos, goal_quat)
    raw = np.asarray(dynamics, dtype=float) * d
    lin = raw[..., :3]
    ang = raw[..., 3:]
    lin_norm = np.linalg.norm(lin, axis=-1, keepdims=True)
    ang_norm = np.linalg.norm(ang, axis=-1, keepdims=True)
    lin = lin * np.minimum(1.0, speed_cap.linear / np.maximum(lin_norm, 1e-300))
    ang = ang * np.minimum(1.0, speed_cap.angular / np.maximum(ang_norm, 1e-300))
    return np.concatenate([lin, ang], axis=-1)


def sample_uniform_action(
    object_attractor: Pose,
    rng: np.random.Generator,
    ranges: DynamicsRanges = DynamicsRanges(),
    speed_cap: SpeedCap = SpeedCap(),
) -> DSAction:
    """Draw an action anchored exactly at an object attractor.

    Only the dynamics entries are random (i.i.d. uniform in the configured
    ranges); the attractor is taken as-is so resampled particles stay on
    perceived objects.
    """
    return DSAction(object_attractor, ranges.sample(rng), speed_cap)
