"""Deterministic fixed-step world: plant, scheduler, and the full loop.

Two rates drive everything: the 200 Hz control tick (confidence update,
wrench, plant integration) and the 20 Hz estimator tick (particle filter,
estimate publication, correction episodes, language-model queries).  The
estimator tick runs first whenever the two coincide, consuming the state
the last control step produced.

Within an estimator tick the filter order matters: predict, weight against
the observed twist, publish the weighted-mean estimate, then resample.
Publishing before resampling means prior-injected particles only enter the
published estimate after they have been weighed against an observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import (
    ConfidenceState,
    ControllerConfig,
    Wrench,
    update_confidence,
    wrench_from_confidence,
)
from .ds_action import DSAction, reference_velocity
from .estimator import (
    BeliefState,
    EstimatorConfig,
    estimate,
    predict,
    resample,
    set_commanded_action,
    update_weights,
)
from .events import EventLog
from .llm_clients import ModelClient, client_from_spec
from .orchestrator import (
    Transcript,
    build_system_prompt,
    build_user_prompt,
    decide,
    record_correction,
)
from .pose_math import Pose, Twist, integrate_pose, quat_angle_between
from .scenario import HumanSpec, PullSegment, Scenario, SimConfig, WrenchSegment
from .scene import (
    ActionDictionary,
    HeldState,
    SceneObject,
    SemanticAction,
    UnknownAction,
    apply_pick,
    apply_place,
    build_dictionary,
    ds_to_semantic,
    semantic_to_ds,
    track_holder,
)


class PlantState:
    """6-DoF point plant standing in for the gravity-compensated arm."""

    def __init__(self, pose: Pose, mass: float = 1.0, inertia: float = 0.1):
        self.pose = pose
        self.twist = Twist.zero()
        self.mass = mass
        self.inertia = inertia


def step_control(
    plant: PlantState,
    wrench_cmd: Wrench,
    wrench_human: Wrench,
    dt: float,
    cap_linear: float = 2.0,
    cap_angular: float = 4.0,
) -> PlantState:
    """Semi-implicit Euler step under the combined wrench.

    The updated twist is hard-capped per block before integrating the
    pose, so a single step can never teleport the plant.
    """
    accel = (wrench_cmd.force + wrench_human.force) / plant.mass
    alpha = (wrench_cmd.torque + wrench_human.torque) / plant.inertia
    lin = plant.twist.linear + accel * dt
    ang = plant.twist.angular + alpha * dt
    ln = np.linalg.norm(lin)
    an = np.linalg.norm(ang)
    if ln > cap_linear:
        lin = lin * (cap_linear / ln)
    if an > cap_angular:
        ang = ang * (cap_angular / an)
    plant.twist = Twist(lin, ang)
    plant.pose = integrate_pose(plant.pose, plant.twist, dt)
    return plant


class HumanModel:
    """Wrench source for the scripted / virtual / interactive human."""

    def __init__(self, spec: HumanSpec):
        self.spec = spec
        self._interactive = Wrench.zero()

    def set_interactive_wrench(self, wrench: Wrench) -> None:
        self._interactive = wrench

    def wrench_at(self, t: float, ee_position: np.ndarray) -> Wrench:
        if self.spec.mode == "none":
            return Wrench.zero()
        if self.spec.mode == "interactive":
            return self._interactive
        for seg in self.spec.segments:
            if seg.start <= t < seg.end:
                if isinstance(seg, WrenchSegment):
                    return Wrench(seg.force, seg.torque)
                if isinstance(seg, PullSegment):
                    delta = seg.target - ee_position
                    force = seg.stiffness * delta
                    norm = np.linalg.norm(force)
                    if norm > seg.max_force:
                        force = force * (seg.max_force / norm)
                    return Wrench(force, np.zeros(3))
        return Wrench.zero()


@dataclass
class EpisodeState:
    open: bool = False
    opened_tick: int = 0


class CorrectionMonitor:
    """Opens on confidence collapse under contact, closes on recovery.

    On close, the current estimate is matched back to the dictionary; a
    match that differs from the commanded action is the semantic
    correction.
    """

    def __init__(self, c_low: float, c_high: float):
        self.c_low = c_low
        self.c_high = c_high
        self.state = EpisodeState()

    def update(
        self,
        c: float,
        human_active: bool,
        est: DSAction,
        dictionary: ActionDictionary,
        commanded: SemanticAction | None,
        match_threshold: float,
        rot_weight: float,
    ) -> tuple[str | None, SemanticAction | None]:
        """Returns (edge, correction): edge is 'open'/'close'/None."""
        if not self.state.open:
            if human_active and c < self.c_low:
                self.state.open = True
                return "open", None
            return None, None
        if c >= self.c_high:
            self.state.open = False
            matched = ds_to_semantic(dictionary, est, match_threshold, rot_weight)
            if matched is not None and matched != commanded:
                return "close", matched
            return "close", None
        return None, None


def detect_correction_episode(
    confidences: list[float],
    human_active: list[bool],
    estimates: list[DSAction],
    dictionary: ActionDictionary,
    commanded: SemanticAction | None,
    c_low: float = 0.5,
    c_high: float = 0.9,
    match_threshold: float = 0.12,
    rot_weight: float = 0.5,
) -> SemanticAction | None:
    """Offline version over aligned per-tick streams; first correction wins."""
    monitor = CorrectionMonitor(c_low, c_high)
    for c, active, est in zip(confidences, human_active, estimates):
        _, corrected = monitor.update(
            c, active, est, dictionary, commanded, match_threshold, rot_weight
        )
        if corrected is not None:
            return corrected
    return None


def _hold_action(pose: Pose, est_cfg: EstimatorConfig) -> DSAction:
    return DSAction(pose, est_cfg.ranges.midpoint(), est_cfg.speed_cap)


class Simulation:
    """Owns all mutable state of one run; stepped by control tick."""

    def __init__(self, scenario: Scenario, client: ModelClient | None = None):
        self.scenario = scenario
        self.cfg = scenario.sim
        self.ctrl_cfg: ControllerConfig = scenario.controller
        self.est_cfg: EstimatorConfig = scenario.estimator
        self.scene_cfg = scenario.scene_cfg

        self.plant = PlantState(scenario.ee_start, self.cfg.mass, self.cfg.inertia)
        self.objects: list[SceneObject] = list(scenario.objects)
        self.held: HeldState = scenario.held
        self.human = HumanModel(scenario.human)
        self.client = client if client is not None else client_from_spec(scenario.llm)

        self.conf = ConfidenceState(self.ctrl_cfg, self.cfg.dt_control, initial=1.0)
        hold = _hold_action(self.plant.pose, self.est_cfg)
        self.belief = BeliefState(hold, self.est_cfg, seed=scenario.seed)
        self.published = hold

        self.transcript = Transcript(self.cfg.prompt_window)
        self.system_prompt = build_system_prompt(self.objects)
        self.monitor = CorrectionMonitor(self.cfg.episode_c_low, self.cfg.episode_c_high)
        self.log = EventLog()

        self.tick = 0
        self.commanded: SemanticAction | None = None
        self.commanded_ds: DSAction = hold
        self.action_done = True
        self.in_flight = False
        self._pending: tuple[SemanticAction | None, str] | None = None
        self._human_active_since_last_est = False
        self._last_query_time = -1e9
        self._step_index = 0

    # -- helpers -------------------------------------------------------

    @property
    def time(self) -> float:
        return self.tick * self.cfg.dt_control

    def labels(self) -> dict[str, str]:
        return {o.id: o.label for o in self.objects}

    def dictionary(self) -> ActionDictionary:
        return build_dictionary(self.objects, self.held, self.scene_cfg)

    def _arrived(self) -> bool:
        target = self.published.attractor
        pos_err = float(np.linalg.norm(self.plant.pose.position - target.position))
        rot_err = float(quat_angle_between(self.plant.pose.orientation, target.orientation))
        speed = float(np.linalg.norm(self.plant.twist.linear))
        return (
            pos_err < self.cfg.arrival_pos
            and rot_err < self.cfg.arrival_rot
            and speed < self.cfg.arrival_speed
        )

    # -- language model ------------------------------------------------

    def _issue_query(self) -> None:
        dictionary = self.dictionary()
        last = self.transcript.entries[-1] if self.transcript.entries else None
        correction = last.correction if last else None
        last_action = None
        last_succeeded = None
        failure_reason = None
        if last is not None and correction is None:
            last_action = last.proposed
            if last.execution_result == "succeeded":
                last_succeeded = True
            elif last.execution_result.startswith("failed:"):
                last_succeeded = False
                failure_reason = last.execution_result.split(":", 1)[1]
            if last_action is None:
                last_action, last_succeeded = None, None
        prompt = build_user_prompt(
            self.objects,
            self.held,
            dictionary,
            planned=None,
            last_action=last_action,
            last_succeeded=last_succeeded,
            failure_reason=failure_reason,
            correction=correction,
        )
        self.log.emit(self.tick, self.time, "llm_query", step=self._step_index, prompt=prompt)
        decision = decide(
            self.client,
            self.system_prompt,
            prompt,
            self.transcript,
            self.labels(),
            self._step_index,
            self.cfg.retry_budget,
        )
        self._step_index += 1
        self._pending = (decision.action, decision.entry.execution_result)
        self.in_flight = True
        self._last_query_time = self.time

    def _apply_pending(self) -> None:
        action, result = self._pending  # type: ignore[misc]
        self._pending = None
        self.in_flight = False
        if action is None:
            self._inject_hold()
            self.log.emit(
                self.tick, self.time, "llm_action", verb=None, object_id=None, result=result
            )
            return
        try:
            ds = semantic_to_ds(self.dictionary(), action)
        except UnknownAction:
            self.transcript.amend_last(execution_result="failed:invalid_action")
            self._inject_hold()
            self.log.emit(
                self.tick,
                self.time,
                "llm_action",
                verb=action.verb,
                object_id=action.object_id,
                result="failed:invalid_action",
            )
            return
        self.commanded = action
        self.commanded_ds = ds
        self.action_done = False
        set_commanded_action(self.belief, ds)
        self.published = ds
        self.log.emit(
            self.tick,
            self.time,
            "llm_action",
            verb=action.verb,
            object_id=action.object_id,
            result="accepted",
        )

    def _inject_hold(self) -> None:
        hold = _hold_action(self.plant.pose, self.est_cfg)
        self.commanded = None
        self.commanded_ds = hold
        self.action_done = True
        set_commanded_action(self.belief, hold)
        self.published = hold

    # -- action completion ---------------------------------------------

    def _complete_action(self) -> None:
        assert self.commanded is not None
        verb = self.commanded.verb
        obj_id = self.commanded.object_id
        if verb == "pick":
            self.objects = apply_pick(
                self.objects, obj_id, self.plant.pose, self.scene_cfg.grasp_offset
            )
            self.held = HeldState(obj_id, self.held.human_holding)
            self.log.emit(self.tick, self.time, "pick", object_id=obj_id)
        elif verb == "place":
            carried = self.held.robot_holding
            if carried is not None:
                self.objects = apply_place(self.objects, carried, obj_id)
                self.held = HeldState(None, self.held.human_holding)
                self.log.emit(
                    self.tick, self.time, "place", object_id=carried, location_id=obj_id
                )
        self.action_done = True
        if self.transcript.entries:
            self.transcript.amend_last(execution_result="succeeded")

    # -- ticks -----------------------------------------------------------

    def estimator_tick(self) -> None:
        if self._pending is not None:
            self._apply_pending()
            self._log_samples(self.conf.scalar)
            self._human_active_since_last_est = False
            return

        c = self.conf.scalar
        dt = self.cfg.dt_estimator
        predict(self.belief, c, dt)
        update_weights(self.belief, self.plant.pose, self.plant.twist)
        est = estimate(self.belief)
        if not self.commanded_ds.compliant:
            self.published = est
        dictionary = self.dictionary()
        self._log_samples(c)

        edge, corrected = self.monitor.update(
            c,
            self._human_active_since_last_est,
            est,
            dictionary,
            self.commanded,
            self.scene_cfg.match_threshold,
            self.scene_cfg.match_rot_weight,
        )
        self._human_active_since_last_est = False
        if edge == "open":
            self.log.emit(self.tick, self.time, "correction_start", confidence=c)
        elif edge == "close":
            matched = f"{corrected.verb} {corrected.object_id}" if corrected else None
            self.log.emit(self.tick, self.time, "correction_end", matched=matched)
            if corrected is not None:
                entry = dictionary.lookup(corrected)
                self.log.emit(
                    self.tick,
                    self.time,
                    "semantic_correction",
                    verb=corrected.verb,
                    object_id=corrected.object_id,
                    label=entry.label,
                )
                if self.transcript.entries:
                    record_correction(self.transcript, corrected, entry.label)
                self.commanded = corrected
                self.commanded_ds = entry.ds
                self.action_done = False
                set_commanded_action(self.belief, entry.ds)
                self.published = entry.ds

        resample(self.belief, c, dictionary.ds_actions())

        if self.monitor.state.open or self.in_flight:
            return
        if self.tick == 0:
            self._issue_query()
            return
        if self.commanded_ds.compliant:
            return
        if self._arrived():
            if not self.action_done:
                self._complete_action()
                self._issue_query()
            elif self.time - self._last_query_time >= self.cfg.requery_cooldown:
                self._issue_query()

    def _log_samples(self, c: float) -> None:
        rate = float(np.clip(1.0 - c, 0.0, 1.0))
        self.log.emit(
            self.tick,
            self.time,
            "confidence_sample",
            c_lin=self.conf.c_lin,
            c_rot=self.conf.c_rot,
            resample_rate=rate,
            pose=[float(v) for v in self.plant.pose.to_array()],
            twist=[float(v) for v in self.plant.twist.to_array()],
            held_robot=self.held.robot_holding,
            held_human=self.held.human_holding,
            objects={o.id: [float(v) for v in o.pose.to_array()] for o in self.objects},
            commanded=(
                f"{self.commanded.verb} {self.commanded.object_id}" if self.commanded else None
            ),
            in_flight=self.in_flight,
        )
        est = self.published
        self.log.emit(
            self.tick,
            self.time,
            "estimate_sample",
            attractor=[float(v) for v in est.attractor.to_array()],
            dynamics=[float(v) for v in est.dynamics],
        )

    def control_tick(self) -> None:
        cfg = self.cfg
        if self.commanded_ds.compliant:
            # compliant mode: the attractor rides the current pose, so the
            # reference is zero and the robot is pure (floored) damping
            ref = Twist.zero()
        else:
            ref = reference_velocity(self.published, self.plant.pose)

        update_confidence(self.conf, self.plant.twist, ref, cfg.dt_control, self.ctrl_cfg)
        c_lin, c_rot = self.conf.c_lin, self.conf.c_rot
        if self.commanded_ds.compliant:
            c_lin = max(c_lin, cfg.cocarry_conf_floor)
            c_rot = max(c_rot, cfg.cocarry_conf_floor)
        wrench_cmd = wrench_from_confidence(
            c_lin, c_rot, self.plant.twist, ref, self.ctrl_cfg
        )
        wrench_h = self.human.wrench_at(self.time, self.plant.pose.position)
        human_active = not wrench_h.is_zero()
        if human_active:
            self._human_active_since_last_est = True

        if human_active or self.tick % cfg.substeps == 0:
            self.log.emit(
                self.tick,
                self.time,
                "wrench_sample",
                command=[float(v) for v in np.concatenate([wrench_cmd.force, wrench_cmd.torque])],
                human=[float(v) for v in np.concatenate([wrench_h.force, wrench_h.torque])],
            )

        step_control(
            self.plant,
            wrench_cmd,
            wrench_h,
            cfg.dt_control,
            cfg.twist_cap_linear,
            cfg.twist_cap_angular,
        )
        if self.held.robot_holding is not None:
            self.objects = track_holder(
                self.objects, self.held.robot_holding, self.plant.pose, self.scene_cfg.grasp_offset
            )
        self.tick += 1

    def step(self) -> None:
        """One control period; runs the estimator tick first when aligned."""
        if self.tick % self.cfg.substeps == 0:
            self.estimator_tick()
        self.control_tick()

    def run(self) -> EventLog:
        total = int(round(self.scenario.duration * self.cfg.control_rate))
        for _ in range(total):
            self.step()
        return self.log


def run_scenario(scenario: Scenario, client: ModelClient | None = None) -> EventLog:
    """Execute a scenario headlessly and return its event log."""
    return Simulation(scenario, client=client).run()


def track_ds_batch(
    goal_pos: np.ndarray,
    goal_quat: np.ndarray,
    dynamics: np.ndarray,
    start_pos: np.ndarray,
    start_quat: np.ndarray,
    ctrl_cfg: ControllerConfig = ControllerConfig(),
    sim_cfg: SimConfig = SimConfig(),
    speed_cap=None,
    max_duration: float = 60.0,
    pos_tol: float = 1e-3,
    rot_tol: float = 1e-2,
) -> np.ndarray:
    """Vectorized closed-loop rollouts: N plants each tracking its own goal.

    Same control law and plant model as the scalar path, evaluated for all
    runs per tick; returns per-run convergence times (NaN where a run never
    reached both tolerances).  Convergence is checked once per estimator
    period.
    """
    from .ds_action import SpeedCap, reference_velocity_arrays
    from .pose_math import quat_exp, quat_log, quat_multiply, quat_normalize

    cap = speed_cap or SpeedCap()
    n = len(goal_pos)
    pos = np.array(start_pos, dtype=float)
    quat = quat_normalize(np.array(start_quat, dtype=float))
    lin = np.zeros((n, 3))
    ang = np.zeros((n, 3))
    dt = sim_cfg.dt_control
    window = int(np.ceil(ctrl_cfg.horizon / dt))
    errors = np.zeros((n, window, 2))
    sums = np.zeros((n, 2))
    head = 0
    conf = np.ones((n, 2))
    times = np.full(n, np.nan)
    active = np.ones(n, dtype=bool)
    goal_quat_conj = np.array(goal_quat, dtype=float)
    goal_quat_conj[:, 1:] *= -1.0

    total = int(round(max_duration / dt))
    for k in range(total):
        if k % sim_cfg.substeps == 0:
            pos_err = np.linalg.norm(pos - goal_pos, axis=1)
            rot_err = np.linalg.norm(quat_log(quat_multiply(quat, goal_quat_conj)), axis=1)
            done = active & (pos_err < pos_tol) & (rot_err < rot_tol)
            times[done] = k * dt
            active &= ~done
            if not active.any():
                break

        refs = reference_velocity_arrays(pos, quat, goal_pos, goal_quat, dynamics, cap)
        err_lin = lin - refs[:, :3]
        err_ang = ang - refs[:, 3:]
        e = np.stack([np.linalg.norm(err_lin, axis=1) * dt, np.linalg.norm(err_ang, axis=1) * dt], axis=1)
        sums += e - errors[:, head, :]
        errors[:, head, :] = e
        head = (head + 1) % window
        if head == 0:
            sums = errors.sum(axis=1)
        raw = np.clip(
            1.0 - sums / np.array([ctrl_cfg.error_scale_lin, ctrl_cfg.error_scale_rot]), 0.0, 1.0
        )
        rates = np.array([ctrl_cfg.ascent_rate_lin, ctrl_cfg.ascent_rate_rot]) * dt
        conf = np.where(raw < conf, raw, np.minimum(raw, conf + rates))

        d_lin = np.maximum(conf[:, 0] * ctrl_cfg.d_lin_high, ctrl_cfg.d_lin_low)
        d_rot = np.maximum(conf[:, 1] * ctrl_cfg.d_rot_high, ctrl_cfg.d_rot_low)
        force = -d_lin[:, None] * err_lin
        torque = -d_rot[:, None] * err_ang
        fn = np.linalg.norm(force, axis=1, keepdims=True)
        tn = np.linalg.norm(torque, axis=1, keepdims=True)
        force *= np.minimum(1.0, ctrl_cfg.force_cap / np.maximum(fn, 1e-300))
        torque *= np.minimum(1.0, ctrl_cfg.torque_cap / np.maximum(tn, 1e-300))

        lin = lin + force / sim_cfg.mass * dt
        ang = ang + torque / sim_cfg.inertia * dt
        ln = np.linalg.norm(lin, axis=1, keepdims=True)
        an = np.linalg.norm(ang, axis=1, keepdims=True)
        lin *= np.minimum(1.0, sim_cfg.twist_cap_linear / np.maximum(ln, 1e-300))
        ang *= np.minimum(1.0, sim_cfg.twist_cap_angular / np.maximum(an, 1e-300))
        pos = pos + lin * dt
        quat = quat_normalize(quat_multiply(quat_exp(ang * dt), quat))
    return times


def track_ds(
    action: DSAction,
    start_pose: Pose,
    ctrl_cfg: ControllerConfig = ControllerConfig(),
    sim_cfg: SimConfig = SimConfig(),
    max_duration: float = 60.0,
    pos_tol: float = 1e-3,
    rot_tol: float = 1e-2,
) -> tuple[float | None, PlantState]:
    """Closed-loop plant+controller rollout toward one DS action.

    Returns (time to reach both tolerances, final plant state); the time is
    None when the run hits max_duration without converging.  Convergence is
    checked once per estimator period.
    """
    plant = PlantState(start_pose, sim_cfg.mass, sim_cfg.inertia)
    conf = ConfidenceState(ctrl_cfg, sim_cfg.dt_control, initial=1.0)
    dt = sim_cfg.dt_control
    total = int(round(max_duration / dt))
    goal = action.attractor
    for k in range(total):
        if k % sim_cfg.substeps == 0:
            pos_err = float(np.linalg.norm(plant.pose.position - goal.position))
            rot_err = float(quat_angle_between(plant.pose.orientation, goal.orientation))
            if pos_err < pos_tol and rot_err < rot_tol:
                return k * dt, plant
        ref = reference_velocity(action, plant.pose)
        update_confidence(conf, plant.twist, ref, dt, ctrl_cfg)
        wrench = wrench_from_confidence(conf.c_lin, conf.c_rot, plant.twist, ref, ctrl_cfg)
        step_control(
            plant, wrench, Wrench.zero(), dt, sim_cfg.twist_cap_linear, sim_cfg.twist_cap_angular
        )
    pos_err = float(np.linalg.norm(plant.pose.position - goal.position))
    rot_err = float(quat_angle_between(plant.pose.orientation, goal.orientation))
    if pos_err < pos_tol and rot_err < rot_tol:
        return total * dt, plant
    return None, plant
