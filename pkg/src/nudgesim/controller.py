"""Confidence-scaled variable damping impedance control.

Confidence per block (linear / rotational) is one minus a normalized
integral of velocity-tracking error over a sliding window.  It drops
instantly when tracking degrades and recovers at a bounded ascent rate, so
a human push collapses the gains at once while release restores them
smoothly.  The wrench command is damping-only:

    force  = -max(c_lin * D_lin_high, D_lin_low) * (v - v_ref)
    torque = -max(c_rot * D_rot_high, D_rot_low) * (w - w_ref)

with each block norm-capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pose_math import Twist


@dataclass(frozen=True)
class ControllerConfig:
    d_lin_high: float = 85.0  # N*s/m
    d_lin_low: float = 1.0
    d_rot_high: float = 13.0  # N*m*s/rad
    d_rot_low: float = 1.0
    horizon: float = 0.5  # error-integration window, s
    error_scale_lin: float = 0.15  # integrated m/s * s that zeroes confidence
    error_scale_rot: float = 0.4  # integrated rad/s * s
    ascent_rate_lin: float = 0.41  # 1/s
    ascent_rate_rot: float = 0.49  # 1/s
    force_cap: float = 60.0  # N
    torque_cap: float = 10.0  # N*m

    def __post_init__(self):
        if not (self.d_lin_high >= self.d_lin_low > 0):
            raise ValueError("need d_lin_high >= d_lin_low > 0")
        if not (self.d_rot_high >= self.d_rot_low > 0):
            raise ValueError("need d_rot_high >= d_rot_low > 0")
        if self.horizon <= 0 or self.ascent_rate_lin <= 0 or self.ascent_rate_rot <= 0:
            raise ValueError("horizon and ascent rates must be positive")


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        t = np.asarray(self.torque, dtype=float)
        if f.shape != (3,) or t.shape != (3,):
            raise ValueError("force and torque must be 3-vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise ValueError("wrench must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    @staticmethod
    def zero() -> "Wrench":
        return Wrench()

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)

    def is_zero(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.force) <= tol and np.linalg.norm(self.torque) <= tol)


class ConfidenceState:
    """Per-block confidence in [0, 1] plus the error window behind it.

    The window holds exactly ceil(horizon / dt) samples of
    (|v - v_ref|, |w - w_ref|); it starts zero-filled, i.e. the controller
    assumes perfect tracking before the first sample.
    """

    def __init__(self, cfg: ControllerConfig, dt: float, initial: float = 1.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.window_len = int(math.ceil(cfg.horizon / dt))
        self._errors = np.zeros((self.window_len, 2))
        self._head = 0
        self._sums = np.zeros(2)
        self.c_lin = float(np.clip(initial, 0.0, 1.0))
        self.c_rot = float(np.clip(initial, 0.0, 1.0))

    @property
    def scalar(self) -> float:
        """The single confidence used for resampling: min of the blocks."""
        return min(self.c_lin, self.c_rot)

    def window_sums(self) -> tuple[float, float]:
        return float(self._sums[0]), float(self._sums[1])

    def push_error(self, lin_err: float, rot_err: float) -> None:
        self._sums[0] += lin_err - self._errors[self._head, 0]
        self._sums[1] += rot_err - self._errors[self._head, 1]
        self._errors[self._head, 0] = lin_err
        self._errors[self._head, 1] = rot_err
        self._head = (self._head + 1) % self.window_len
        if self._head == 0:
            # resync the running sums once per wrap to cancel float drift
            self._sums = self._errors.sum(axis=0)


def update_confidence(
    state: ConfidenceState,
    twist: Twist,
    ref_twist: Twist,
    dt: float,
    cfg: ControllerConfig,
) -> ConfidenceState:
    """Advance confidence one control step (mutates and returns `state`).

    Raw confidence is clip(1 - E / error_scale, 0, 1) where E integrates
    the windowed error norm; drops apply instantly, rises are limited to
    the configured ascent rate.
    """
    lin_err = float(np.linalg.norm(twist.linear - ref_twist.linear)) * dt
    rot_err = float(np.linalg.norm(twist.angular - ref_twist.angular)) * dt
    state.push_error(lin_err, rot_err)
    e_lin, e_rot = state.window_sums()

    raw_lin = float(np.clip(1.0 - e_lin / cfg.error_scale_lin, 0.0, 1.0))
    raw_rot = float(np.clip(1.0 - e_rot / cfg.error_scale_rot, 0.0, 1.0))

    if raw_lin < state.c_lin:
        state.c_lin = raw_lin
    else:
        state.c_lin = min(raw_lin, state.c_lin + cfg.ascent_rate_lin * dt)
    if raw_rot < state.c_rot:
        state.c_rot = raw_rot
    else:
        state.c_rot = min(raw_rot, state.c_rot + cfg.ascent_rate_rot * dt)
    return state


def effective_gains(c_lin: float, c_rot: float, cfg: ControllerConfig) -> tuple[float, float]:
    return (
        max(c_lin * cfg.d_lin_high, cfg.d_lin_low),
        max(c_rot * cfg.d_rot_high, cfg.d_rot_low),
    )


def wrench_from_confidence(
    c_lin: float, c_rot: float, twist: Twist, ref_twist: Twist, cfg: ControllerConfig
) -> Wrench:
    """Damping-only wrench toward the reference twist at given confidences."""
    d_lin, d_rot = effective_gains(c_lin, c_rot, cfg)
    force = -d_lin * (twist.linear - ref_twist.linear)
    torque = -d_rot * (twist.angular - ref_twist.angular)
    fnorm = np.linalg.norm(force)
    tnorm = np.linalg.norm(torque)
    if fnorm > cfg.force_cap:
        force = force * (cfg.force_cap / fnorm)
    if tnorm > cfg.torque_cap:
        torque = torque * (cfg.torque_cap / tnorm)
    return Wrench(force, torque)


def control_wrench(
    conf: ConfidenceState, twist: Twist, ref_twist: Twist, cfg: ControllerConfig
) -> Wrench:
    return wrench_from_confidence(conf.c_lin, conf.c_rot, twist, ref_twist, cfg)
