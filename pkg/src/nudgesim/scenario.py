"""Scenario files: scene, human model, config overrides, and the run spec.

A scenario is a JSON document with sections `scene`, `human`, `controller`,
`estimator`, `sim`, `llm`, and `run`.  Everything a run needs is in the
file (plus the seed), which is what makes headless runs reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .controller import ControllerConfig
from .ds_action import DynamicsRanges, SpeedCap
from .estimator import EstimatorConfig
from .pose_math import Pose
from .scene import HeldState, SceneConfig, SceneObject, validate_scene


class ScenarioInvalid(ValueError):
    """A scenario file failed validation; the message names the field."""


@dataclass(frozen=True)
class SimConfig:
    control_rate: float = 200.0  # Hz
    estimator_rate: float = 20.0  # Hz
    mass: float = 1.0  # kg
    inertia: float = 0.1  # kg*m^2, isotropic
    twist_cap_linear: float = 2.0  # m/s hard plant limit
    twist_cap_angular: float = 4.0  # rad/s
    arrival_pos: float = 0.02  # m
    arrival_rot: float = 0.05  # rad
    arrival_speed: float = 0.02  # m/s
    episode_c_low: float = 0.5
    episode_c_high: float = 0.9
    requery_cooldown: float = 1.0  # s between retries while holding
    cocarry_conf_floor: float = 0.2
    prompt_window: int = 20
    retry_budget: int = 2

    def __post_init__(self):
        ratio = self.control_rate / self.estimator_rate
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ScenarioInvalid("sim: control_rate must be an integer multiple of estimator_rate")

    @property
    def dt_control(self) -> float:
        return 1.0 / self.control_rate

    @property
    def dt_estimator(self) -> float:
        return 1.0 / self.estimator_rate

    @property
    def substeps(self) -> int:
        return int(round(self.control_rate / self.estimator_rate))


@dataclass(frozen=True)
class WrenchSegment:
    start: float
    end: float
    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        if self.end <= self.start:
            raise ScenarioInvalid("human.segments: end must exceed start")


@dataclass(frozen=True)
class PullSegment:
    start: float
    end: float
    target: np.ndarray  # world position the human pulls the end effector toward
    stiffness: float = 50.0  # N/m
    max_force: float = 20.0  # N

    def __post_init__(self):
        if self.end <= self.start:
            raise ScenarioInvalid("human.segments: end must exceed start")


@dataclass(frozen=True)
class HumanSpec:
    mode: str = "none"  # none | scripted | virtual | interactive
    segments: tuple = ()
    wrench_clamp: float = 40.0  # N, per-client clamp in interactive mode

    def __post_init__(self):
        if self.mode not in ("none", "scripted", "virtual", "interactive"):
            raise ScenarioInvalid(f"human.mode: unknown mode {self.mode!r}")
        spans = sorted((s.start, s.end) for s in self.segments)
        for (s0, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ScenarioInvalid("human.segments: overlapping time spans")


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    duration: float = 10.0
    ee_start: Pose = field(default_factory=Pose.identity)
    objects: tuple[SceneObject, ...] = ()
    held: HeldState = HeldState()
    human: HumanSpec = HumanSpec()
    controller: ControllerConfig = ControllerConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    sim: SimConfig = SimConfig()
    scene_cfg: SceneConfig = SceneConfig()
    llm: dict = field(default_factory=lambda: {"kind": "mock", "policy": {"kind": "sequence", "responses": []}})

    def __post_init__(self):
        if self.duration < 0:
            raise ScenarioInvalid("run.duration: must be non-negative")
        if not self.objects:
            raise ScenarioInvalid("scene: at least one object required")
        validate_scene(list(self.objects))
        ids = {o.id for o in self.objects}
        for holder, held_id in (("robot", self.held.robot_holding), ("human", self.held.human_holding)):
            if held_id is not None and held_id not in ids:
                raise ScenarioInvalid(f"held.{holder}: unknown object {held_id!r}")


def _pose_from(raw, where: str) -> Pose:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"{where}: not a numeric pose") from exc
    if arr.shape == (3,):
        return Pose(arr)
    if arr.shape == (7,):
        return Pose(arr[:3], arr[3:])
    raise ScenarioInvalid(f"{where}: pose must have 3 or 7 numbers, got shape {arr.shape}")


def _pair(raw, where: str) -> tuple[float, float]:
    try:
        lo, hi = float(raw[0]), float(raw[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ScenarioInvalid(f"{where}: expected [low, high]") from exc
    return lo, hi


def _controller_from(raw: dict) -> ControllerConfig:
    try:
        return replace(ControllerConfig(), **raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"controller: {exc}") from exc


def _estimator_from(raw: dict) -> EstimatorConfig:
    raw = dict(raw)
    kwargs = {}
    if "ranges" in raw:
        r = raw.pop("ranges")
        kwargs["ranges"] = DynamicsRanges(
            _pair(r.get("cartesian", (-0.6, -0.4)), "estimator.ranges.cartesian"),
            _pair(r.get("rotational", (-0.9, -0.6)), "estimator.ranges.rotational"),
        )
    if "speed_cap" in raw:
        s = raw.pop("speed_cap")
        kwargs["speed_cap"] = SpeedCap(float(s.get("linear", 0.5)), float(s.get("angular", 1.5)))
    for key in ("noise_lin", "noise_rot", "noise_goal_rot"):
        if key in raw:
            raw[key] = _pair(raw[key], f"estimator.{key}")
    try:
        return replace(EstimatorConfig(), **raw, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"estimator: {exc}") from exc


def _scene_cfg_from(raw: dict) -> SceneConfig:
    raw = dict(raw)
    kwargs = {}
    if "ranges" in raw:
        r = raw.pop("ranges")
        kwargs["ranges"] = DynamicsRanges(
            _pair(r.get("cartesian", (-0.6, -0.4)), "scene_config.ranges.cartesian"),
            _pair(r.get("rotational", (-0.9, -0.6)), "scene_config.ranges.rotational"),
        )
    if "speed_cap" in raw:
        s = raw.pop("speed_cap")
        kwargs["speed_cap"] = SpeedCap(float(s.get("linear", 0.5)), float(s.get("angular", 1.5)))
    try:
        return replace(SceneConfig(), **raw, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"scene_config: {exc}") from exc


def _sim_from(raw: dict) -> SimConfig:
    try:
        return replace(SimConfig(), **raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(f"sim: {exc}") from exc


def _objects_from(raw: list) -> tuple[SceneObject, ...]:
    objects = []
    for i, item in enumerate(raw):
        where = f"scene[{i}]"
        try:
            objects.append(
                SceneObject(
                    id=item["id"],
                    label=item.get("label", item["id"]),
                    category=item["category"],
                    pose=_pose_from(item["pose"], f"{where}.pose"),
                    atop=item.get("atop"),
                )
            )
        except KeyError as exc:
            raise ScenarioInvalid(f"{where}: missing field {exc}") from exc
        except ValueError as exc:
            raise ScenarioInvalid(f"{where}: {exc}") from exc
    return tuple(objects)


def _human_from(raw: dict, objects: tuple[SceneObject, ...], scene_cfg: SceneConfig) -> HumanSpec:
    mode = raw.get("mode", "none")
    segments = []
    by_id = {o.id: o for o in objects}
    for i, seg in enumerate(raw.get("segments", [])):
        where = f"human.segments[{i}]"
        start = float(seg.get("start", 0.0))
        end = float(seg.get("end", start))
        if mode == "scripted":
            segments.append(
                WrenchSegment(
                    start,
                    end,
                    np.asarray(seg.get("force", [0, 0, 0]), dtype=float),
                    np.asarray(seg.get("torque", [0, 0, 0]), dtype=float),
                )
            )
        elif mode == "virtual":
            if "position" in seg:
                target = np.asarray(seg["position"], dtype=float)
            elif "object" in seg:
                obj_id = seg["object"]
                if obj_id not in by_id:
                    raise ScenarioInvalid(f"{where}.object: unknown object {obj_id!r}")
                offset = seg.get("offset", "hover")
                dz = {"hover": scene_cfg.hover_offset, "grasp": scene_cfg.grasp_offset}.get(offset)
                if dz is None:
                    raise ScenarioInvalid(f"{where}.offset: expected 'hover' or 'grasp'")
                target = by_id[obj_id].pose.position + np.array([0.0, 0.0, dz])
            else:
                raise ScenarioInvalid(f"{where}: virtual segment needs `position` or `object`")
            segments.append(
                PullSegment(
                    start,
                    end,
                    target,
                    stiffness=float(seg.get("stiffness", 50.0)),
                    max_force=float(seg.get("max_force", 20.0)),
                )
            )
        else:
            raise ScenarioInvalid(f"human.segments: mode {mode!r} takes no segments")
    return HumanSpec(mode=mode, segments=tuple(segments), wrench_clamp=float(raw.get("wrench_clamp", 40.0)))


def scenario_from_dict(doc: dict) -> Scenario:
    run = doc.get("run", {})
    scene_cfg = _scene_cfg_from(doc.get("scene_config", {}))
    objects = _objects_from(doc.get("scene", []))
    held_raw = doc.get("held", {})
    try:
        held = HeldState(held_raw.get("robot"), held_raw.get("human"))
    except ValueError as exc:
        raise ScenarioInvalid(f"held: {exc}") from exc
    ee_start = _pose_from(run.get("ee_start", [0.0, 0.0, 0.3]), "run.ee_start")
    return Scenario(
        seed=int(run.get("seed", doc.get("seed", 0))),
        duration=float(run.get("duration", doc.get("duration", 10.0))),
        ee_start=ee_start,
        objects=objects,
        held=held,
        human=_human_from(doc.get("human", {}), objects, scene_cfg),
        controller=_controller_from(doc.get("controller", {})),
        estimator=_estimator_from(doc.get("estimator", {})),
        sim=_sim_from(doc.get("sim", {})),
        scene_cfg=scene_cfg,
        llm=doc.get("llm", {"kind": "mock", "policy": {"kind": "sequence", "responses": []}}),
    )


def scenario_from_file(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)
