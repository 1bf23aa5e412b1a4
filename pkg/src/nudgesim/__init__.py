"""Simulator for physically-correctable, language-model-commanded motion.

A 6-DoF end effector follows first-order dynamical-system actions chosen
by a language model; a human can push the robot, which softens the
variable-impedance gains and re-estimates the intended action with a
particle filter; recovered estimates are matched back to semantic actions
and fed to the model as corrections.
"""

from .controller import (
    ConfidenceState,
    ControllerConfig,
    Wrench,
    control_wrench,
    update_confidence,
)
from .ds_action import (
    DSAction,
    DynamicsRanges,
    SpeedCap,
    WorkspaceBounds,
    reference_velocity,
    sample_uniform_action,
)
from .estimator import (
    BeliefState,
    EmptyScene,
    EstimatorConfig,
    Particle,
    estimate,
    predict,
    resample,
    set_commanded_action,
    update_weights,
)
from .events import EventLog, EventRecord
from .orchestrator import (
    ParseFailure,
    Transcript,
    TranscriptEntry,
    build_system_prompt,
    build_user_prompt,
    decide,
    parse_response,
    recall_experiment,
    record_correction,
)
from .pose_math import Pose, Twist, integrate_pose, pose_difference
from .scenario import Scenario, ScenarioInvalid, SimConfig, scenario_from_dict, scenario_from_file
from .scene import (
    ActionDictionary,
    ApproachFilter,
    HeldState,
    SceneConfig,
    SceneObject,
    SemanticAction,
    UnknownAction,
    build_dictionary,
    ds_to_semantic,
    semantic_to_ds,
)
from .sim import PlantState, Simulation, run_scenario, step_control, track_ds

__all__ = [name for name in dir() if not name.startswith("_")]
