"""Particle filter over DS-action parameters (attractor + dynamics).

The belief is a fixed-size weighted cloud stored as flat arrays so the
20 Hz tick stays cheap.  The lifecycle per tick is:

    predict(c)        zero-dynamics drift, noise widened as confidence drops
    update_weights    likelihood exp(-|observed - predicted twist|^2)
    estimate          published weighted mean (position/dynamics arithmetic,
                      orientation via sign-aligned weighted quaternion sum)
    resample(c)       fraction (1 - c) redrawn uniformly on scene-anchored
                      actions, remainder systematically resampled

A language-model command replaces every particle outright, which is how
the proposed semantic action takes over the robot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ds_action import (
    DSAction,
    DynamicsRanges,
    SpeedCap,
    reference_velocity_arrays,
)
from .pose_math import Pose, Twist, quat_exp, quat_multiply, quat_normalize


class EmptyScene(RuntimeError):
    """Raised when resampling has no valid scene actions to anchor on."""


@dataclass(frozen=True)
class EstimatorConfig:
    n_particles: int = 300
    # (low, high) noise std pairs; low applies at full confidence
    noise_lin: tuple[float, float] = (3e-4, 4e-3)
    noise_rot: tuple[float, float] = (2e-4, 8.5e-3)
    noise_goal_rot: tuple[float, float] = (2e-4, 8.5e-3)
    rot_error_weight: float = 0.5
    ranges: DynamicsRanges = DynamicsRanges()
    speed_cap: SpeedCap = SpeedCap()

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        for lo, hi in (self.noise_lin, self.noise_rot, self.noise_goal_rot):
            if not (0 < lo <= hi):
                raise ValueError("noise pairs must satisfy 0 < low <= high")


def _noise_std(pair: tuple[float, float], c: float) -> float:
    lo, hi = pair
    return lo + (1.0 - c) * (hi - lo)


@dataclass(frozen=True)
class Particle:
    action: DSAction
    weight: float


class BeliefState:
    """Weighted particle cloud over DS parameters, with its own seeded RNG."""

    def __init__(self, action: DSAction, cfg: EstimatorConfig, seed: int = 0):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        n = cfg.n_particles
        self.goal_pos = np.tile(action.attractor.position, (n, 1))
        self.goal_quat = np.tile(action.attractor.orientation, (n, 1))
        self.dynamics = np.tile(action.dynamics, (n, 1))
        self.weights = np.full(n, 1.0 / n)
        self._estimate = action

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def particles(self) -> list[Particle]:
        """Materialized view for inspection; storage stays vectorized."""
        out = []
        for i in range(self.n):
            action = DSAction(
                Pose(self.goal_pos[i], self.goal_quat[i]),
                self.dynamics[i],
                self.cfg.speed_cap,
            )
            out.append(Particle(action, float(self.weights[i])))
        return out

    def cloud_snapshot(self, cap: int = 100) -> list[tuple[list[float], float]]:
        """Weight-ordered (position, weight) pairs for the wire protocol."""
        order = np.argsort(self.weights)[::-1][:cap]
        return [
            ([float(v) for v in self.goal_pos[i]], float(self.weights[i]))
            for i in order
        ]


def set_commanded_action(belief: BeliefState, action: DSAction) -> BeliefState:
    """Replace every particle with the commanded action (uniform weights)."""
    n = belief.n
    belief.goal_pos = np.tile(action.attractor.position, (n, 1))
    belief.goal_quat = np.tile(action.attractor.orientation, (n, 1))
    belief.dynamics = np.tile(action.dynamics, (n, 1))
    belief.weights = np.full(n, 1.0 / n)
    belief._estimate = action
    return belief


def predict(belief: BeliefState, c: float, dt: float, cfg: EstimatorConfig | None = None) -> BeliefState:
    """Zero-dynamics drift with confidence-scaled noise.

    Attractor positions and Cartesian dynamics share the Cartesian noise
    channel; rotational dynamics and attractor orientation have their own.
    Dynamics are re-clamped into the sampling ranges afterwards.
    """
    cfg = cfg or belief.cfg
    if not 0.0 <= c <= 1.0:
        raise ValueError("confidence must lie in [0, 1]")
    rng = belief.rng
    n = belief.n
    sqdt = np.sqrt(dt)

    std_lin = _noise_std(cfg.noise_lin, c) * sqdt
    std_rot = _noise_std(cfg.noise_rot, c) * sqdt
    std_grot = _noise_std(cfg.noise_goal_rot, c) * sqdt

    belief.goal_pos = belief.goal_pos + rng.normal(0.0, std_lin, (n, 3))
    rotvecs = rng.normal(0.0, std_grot, (n, 3))
    belief.goal_quat = quat_normalize(quat_multiply(quat_exp(rotvecs), belief.goal_quat))
    dyn = belief.dynamics.copy()
    dyn[:, :3] += rng.normal(0.0, std_lin, (n, 3))
    dyn[:, 3:] += rng.normal(0.0, std_rot, (n, 3))
    belief.dynamics = cfg.ranges.clamp(dyn)
    return belief


def update_weights(belief: BeliefState, x: Pose, observed_twist: Twist) -> BeliefState:
    """Multiply weights by exp(-|error|^2) against each particle's prediction.

    The error stacks the raw linear block with the rotational block scaled
    by the configured relative weight.  A fully underflowed weight vector
    resets to uniform rather than poisoning the filter.
    """
    cfg = belief.cfg
    refs = reference_velocity_arrays(
        x.position,
        x.orientation,
        belief.goal_pos,
        belief.goal_quat,
        belief.dynamics,
        cfg.speed_cap,
    )
    err = observed_twist.to_array()[None, :] - refs
    err[:, 3:] *= cfg.rot_error_weight
    sq = np.sum(err * err, axis=-1)
    belief.weights = belief.weights * np.exp(-sq)
    total = float(belief.weights.sum())
    if total < 1e-300:
        belief.weights = np.full(belief.n, 1.0 / belief.n)
    else:
        belief.weights = belief.weights / total
    return belief


def _systematic_indices(weights: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=int)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    positions = (np.arange(count) + rng.random()) / count
    return np.searchsorted(cum, positions)


def resample(belief: BeliefState, c: float, valid_actions: list[DSAction]) -> BeliefState:
    """Confidence-driven mix of scene-prior injection and systematic resampling.

    floor((1 - c) * N) particles are redrawn on uniformly chosen valid
    actions (attractor kept exactly, dynamics re-sampled); the rest are
    systematically resampled from the current weighted set.  Weights reset
    to uniform.
    """
    if not valid_actions:
        raise EmptyScene("no valid scene actions to resample on")
    if not 0.0 <= c <= 1.0:
        raise ValueError("confidence must lie in [0, 1]")
    cfg = belief.cfg
    rng = belief.rng
    n = belief.n
    rate = float(np.clip(1.0 - c, 0.0, 1.0))
    n_prior = int(np.floor(rate * n))
    n_keep = n - n_prior

    keep_idx = _systematic_indices(belief.weights, n_keep, rng)
    kept_pos = belief.goal_pos[keep_idx]
    kept_quat = belief.goal_quat[keep_idx]
    kept_dyn = belief.dynamics[keep_idx]

    if n_prior > 0:
        choice = rng.integers(0, len(valid_actions), n_prior)
        prior_pos = np.stack([valid_actions[i].attractor.position for i in choice])
        prior_quat = np.stack([valid_actions[i].attractor.orientation for i in choice])
        cart = rng.uniform(cfg.ranges.cartesian[0], cfg.ranges.cartesian[1], (n_prior, 3))
        rot = rng.uniform(cfg.ranges.rotational[0], cfg.ranges.rotational[1], (n_prior, 3))
        prior_dyn = np.concatenate([cart, rot], axis=1)
        belief.goal_pos = np.concatenate([kept_pos, prior_pos])
        belief.goal_quat = np.concatenate([kept_quat, prior_quat])
        belief.dynamics = np.concatenate([kept_dyn, prior_dyn])
    else:
        belief.goal_pos = kept_pos
        belief.goal_quat = kept_quat
        belief.dynamics = kept_dyn
    belief.weights = np.full(n, 1.0 / n)
    return belief


def estimate(belief: BeliefState) -> DSAction:
    """Weighted-mean action; orientation averaged after sign alignment.

    While the cloud still equals the last injected action exactly (the
    state right after a command), that action is returned as-is so the
    estimate matches the command bit-for-bit.
    """
    cached = belief._estimate
    if (
        np.all(belief.goal_pos == cached.attractor.position)
        and np.all(belief.goal_quat == cached.attractor.orientation)
        and np.all(belief.dynamics == cached.dynamics)
    ):
        return cached
    w = belief.weights
    pos = w @ belief.goal_pos
    dyn = w @ belief.dynamics
    ref = belief.goal_quat[int(np.argmax(w))]
    signs = np.where(belief.goal_quat @ ref < 0.0, -1.0, 1.0)
    quat = quat_normalize((w * signs) @ belief.goal_quat)
    action = DSAction(Pose(pos, quat), dyn, belief.cfg.speed_cap)
    belief._estimate = action
    return action
