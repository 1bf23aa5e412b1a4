"""World model and the bidirectional semantic <-> DS action dictionary.

Scene objects come in three categories:

    A  mountable items the robot can pick up (pots, boards, ...)
    B  environment locations things can be placed at (stove, sink, ...)
    C  loose food items that ride atop a category-A carrier

The dictionary is regenerated per (scene, held-state) snapshot and maps
each valid verb+object pair to a concrete DS action.  Estimated DS actions
are matched back to the nearest dictionary entry, which is how a physical
correction becomes a semantic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ds_action import DSAction, DynamicsRanges, SpeedCap
from .pose_math import Pose, quat_angle_between, quat_from_axis_angle

VERBS = ("pick", "place", "co-carry", "move", "tilt", "untilt")
CATEGORIES = ("A", "B", "C")

_X_AXIS = np.array([1.0, 0.0, 0.0])


class UnknownAction(KeyError):
    """A semantic action that is not in the current dictionary."""


@dataclass(frozen=True)
class SceneObject:
    id: str
    label: str
    category: str
    pose: Pose
    atop: str | None = None  # category-C placement parent

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}")


@dataclass(frozen=True)
class HeldState:
    robot_holding: str | None = None
    human_holding: str | None = None

    def __post_init__(self):
        if self.robot_holding is not None and self.robot_holding == self.human_holding:
            raise ValueError("an object can be held by at most one agent")


@dataclass(frozen=True, order=True)
class SemanticAction:
    verb: str
    object_id: str

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValueError(f"unknown verb {self.verb!r}")


@dataclass(frozen=True)
class SceneConfig:
    grasp_offset: float = 0.02  # m above an object for mounting
    hover_offset: float = 0.15  # m above an object for move targets
    tilt_angle: float = math.radians(20.0)
    match_threshold: float = 0.12  # meter-equivalent nearest-entry gate
    match_rot_weight: float = 0.5  # rad -> meter-equivalent weight
    ranges: DynamicsRanges = DynamicsRanges()
    speed_cap: SpeedCap = SpeedCap()


@dataclass(frozen=True)
class DictionaryEntry:
    semantic: SemanticAction
    ds: DSAction
    label: str


@dataclass(frozen=True)
class ActionDictionary:
    entries: tuple[DictionaryEntry, ...]

    def __post_init__(self):
        keys = [e.semantic for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate semantic action in dictionary")

    def __len__(self) -> int:
        return len(self.entries)

    def semantic_actions(self) -> list[SemanticAction]:
        return [e.semantic for e in self.entries]

    def ds_actions(self) -> list[DSAction]:
        return [e.ds for e in self.entries]

    def lookup(self, sem: SemanticAction) -> DictionaryEntry:
        for e in self.entries:
            if e.semantic == sem:
                return e
        raise UnknownAction(f"{sem.verb} {sem.object_id!r} not in dictionary")


def validate_scene(objects: list[SceneObject]) -> None:
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object ids in scene")
    by_id = {o.id: o for o in objects}
    for o in objects:
        if o.category == "C":
            if o.atop is None or o.atop not in by_id:
                raise ValueError(f"category-C object {o.id!r} needs a valid `atop`")
            if by_id[o.atop].category == "C":
                raise ValueError(f"{o.id!r} cannot ride atop another category-C item")


def _lifted(pose: Pose, dz: float, orientation=None) -> Pose:
    quat = pose.orientation if orientation is None else orientation
    return Pose(pose.position + np.array([0.0, 0.0, dz]), quat)


def build_dictionary(
    objects: list[SceneObject], held: HeldState, cfg: SceneConfig = SceneConfig()
) -> ActionDictionary:
    """Enumerate every valid verb+object pair and derive its DS action.

    Ability gating: pick and co-carry only with an empty hand, place and
    tilt/untilt only while holding; move is valid over any object.  Entry
    order is stable (object id, then verb) so nearest-entry ties break
    deterministically.
    """
    if not objects:
        raise ValueError("scene must contain at least one object")
    validate_scene(objects)
    upright = np.array([1.0, 0.0, 0.0, 0.0])
    tilted = quat_from_axis_angle(_X_AXIS, cfg.tilt_angle)
    dyn = DynamicsRanges(cfg.ranges.cartesian, cfg.ranges.rotational).midpoint()
    holding = held.robot_holding

    entries: list[DictionaryEntry] = []

    def add(verb: str, obj: SceneObject, attractor: Pose, compliant: bool = False):
        entries.append(
            DictionaryEntry(
                SemanticAction(verb, obj.id),
                DSAction(attractor, dyn, cfg.speed_cap, compliant=compliant),
                obj.label,
            )
        )

    for obj in sorted(objects, key=lambda o: o.id):
        add("move", obj, _lifted(obj.pose, cfg.hover_offset, upright))
        if holding is None:
            if obj.category == "A" and held.human_holding != obj.id:
                add("pick", obj, _lifted(obj.pose, cfg.grasp_offset))
            if obj.category == "A" and held.human_holding == obj.id:
                add("co-carry", obj, _lifted(obj.pose, cfg.grasp_offset), compliant=True)
        else:
            if obj.category == "B":
                add("place", obj, _lifted(obj.pose, cfg.grasp_offset, upright))
            if obj.id == holding:
                add("tilt", obj, _lifted(obj.pose, cfg.grasp_offset, tilted))
                add("untilt", obj, _lifted(obj.pose, cfg.grasp_offset, upright))

    entries.sort(key=lambda e: (e.semantic.object_id, e.semantic.verb))
    return ActionDictionary(tuple(entries))


def semantic_to_ds(dictionary: ActionDictionary, sem: SemanticAction) -> DSAction:
    """Exact dictionary lookup; raises UnknownAction for invalid pairs."""
    return dictionary.lookup(sem).ds


def action_distance(a: DSAction, b: DSAction, rot_weight: float) -> float:
    dp = float(np.linalg.norm(a.attractor.position - b.attractor.position))
    da = float(quat_angle_between(a.attractor.orientation, b.attractor.orientation))
    return dp + rot_weight * da


def ds_to_semantic(
    dictionary: ActionDictionary,
    est: DSAction,
    match_threshold: float = SceneConfig().match_threshold,
    rot_weight: float = SceneConfig().match_rot_weight,
) -> SemanticAction | None:
    """Nearest dictionary entry by attractor distance, or None beyond the gate."""
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    dists = [action_distance(e.ds, est, rot_weight) for e in dictionary.entries]
    best = int(np.argmin(dists))
    if dists[best] > match_threshold:
        return None
    return dictionary.entries[best].semantic


@dataclass
class ApproachFilterConfig:
    speed_gate: float = 0.05  # m/s below which no target is reported
    sigma_dist: float = 0.5  # m, distance likelihood width
    mass_threshold: float = 0.6
    hold_time: float = 0.3  # s a new mode must persist before switching
    memory: float = 0.8  # per-update weight carried over before relikelihood


class ApproachFilter:
    """Discrete intent filter over object ids for "human is approaching X".

    Each update re-weights candidate objects by how well the hand velocity
    points at them and how close they are, then reports the posterior mode
    once it dominates; switching away from the current answer requires the
    new mode to persist.
    """

    def __init__(self, cfg: ApproachFilterConfig | None = None):
        self.cfg = cfg or ApproachFilterConfig()
        self._weights: dict[str, float] = {}
        self.answer: str | None = None
        self._candidate: str | None = None
        self._candidate_time = 0.0

    def update(
        self,
        hand_pos: np.ndarray,
        hand_vel: np.ndarray,
        objects: list[SceneObject],
        dt: float,
    ) -> str | None:
        cfg = self.cfg
        hand_pos = np.asarray(hand_pos, dtype=float)
        hand_vel = np.asarray(hand_vel, dtype=float)
        speed = float(np.linalg.norm(hand_vel))
        # a carrier is indistinguishable from its rider by angle/distance;
        # report the top of the stack
        ridden = {o.atop for o in objects if o.category == "C" and o.atop}
        objects = [o for o in objects if o.id not in ridden]
        if speed <= cfg.speed_gate or not objects:
            self.answer = None
            self._candidate = None
            self._candidate_time = 0.0
            return None

        ids = [o.id for o in objects]
        prior = np.array([self._weights.get(i, 1.0 / len(ids)) for i in ids])
        prior = cfg.memory * prior / max(prior.sum(), 1e-300) + (1 - cfg.memory) / len(ids)

        like = np.empty(len(ids))
        direction = hand_vel / speed
        for k, obj in enumerate(objects):
            to_obj = obj.pose.position - hand_pos
            dist = float(np.linalg.norm(to_obj))
            if dist < 1e-9:
                angle = 0.0
            else:
                cosang = float(np.clip(np.dot(direction, to_obj / dist), -1.0, 1.0))
                angle = math.acos(cosang)
            like[k] = math.exp(-angle * angle) * math.exp(-(dist * dist) / (cfg.sigma_dist**2))

        post = prior * like
        post = post / max(post.sum(), 1e-300)
        self._weights = dict(zip(ids, post))

        mode = ids[int(np.argmax(post))]
        mass = float(np.max(post))
        raw = mode if mass > cfg.mass_threshold else None

        if raw is not None and raw != self.answer:
            if raw == self._candidate:
                self._candidate_time += dt
            else:
                self._candidate = raw
                self._candidate_time = dt
            if self._candidate_time >= cfg.hold_time or self.answer is None:
                self.answer = raw
                self._candidate = None
                self._candidate_time = 0.0
        else:
            self._candidate = None
            self._candidate_time = 0.0
        return self.answer


def apply_pick(objects: list[SceneObject], obj_id: str, ee_pose: Pose, grasp_offset: float) -> list[SceneObject]:
    """Attach obj_id (and its riders) to the end effector after a pick."""
    return _move_with_riders(objects, obj_id, Pose(
        ee_pose.position - np.array([0.0, 0.0, grasp_offset]), ee_pose.orientation
    ))


def apply_place(objects: list[SceneObject], obj_id: str, location_id: str) -> list[SceneObject]:
    """Set obj_id down at a location, riders following."""
    by_id = {o.id: o for o in objects}
    spot = by_id[location_id].pose
    return _move_with_riders(objects, obj_id, Pose(spot.position, np.array([1.0, 0.0, 0.0, 0.0])))


def track_holder(objects: list[SceneObject], obj_id: str, ee_pose: Pose, grasp_offset: float) -> list[SceneObject]:
    """Keep a held object (and riders) rigidly following the end effector."""
    return apply_pick(objects, obj_id, ee_pose, grasp_offset)


def _move_with_riders(objects: list[SceneObject], obj_id: str, new_pose: Pose) -> list[SceneObject]:
    by_id = {o.id: o for o in objects}
    old = by_id[obj_id].pose
    out = []
    for o in objects:
        if o.id == obj_id:
            out.append(replace(o, pose=new_pose))
        elif o.category == "C" and o.atop == obj_id:
            offset = o.pose.position - old.position
            out.append(replace(o, pose=Pose(new_pose.position + offset, o.pose.orientation)))
        else:
            out.append(o)
    return out
