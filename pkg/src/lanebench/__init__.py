"""lanebench: robustness evaluation for lane detection systems.

A numpy library that scores pluggable lane detectors two ways: conventional
per-frame accuracy and F1 against ground truth, and closed-loop simulation
of an automated lane-centering stack under physical road-surface attacks
(adversarial gray patches and painted lines).
"""

__version__ = "0.1.0"

from .artifacts import AttackArea, AttackBudget, DrawnLine, RoadPatch
from .geometry import CameraModel, ImageFrame
from .lanes import LaneRepresentation, LabeledLanes, canonicalize, filter_ego
from .metrics import AccuracyConfig, classify_outcome, lateral_deviation, match_and_score
from .objective import attack_loss, expected_road_center
from .scene import SceneGeometry, render_scene
from .simulator import CameraConfig, Scenario, Trajectory, VehicleState, bicycle_step, run_scenario

__all__ = [
    "__version__",
    "AttackArea",
    "AttackBudget",
    "DrawnLine",
    "RoadPatch",
    "CameraModel",
    "ImageFrame",
    "LaneRepresentation",
    "LabeledLanes",
    "canonicalize",
    "filter_ego",
    "AccuracyConfig",
    "classify_outcome",
    "lateral_deviation",
    "match_and_score",
    "attack_loss",
    "expected_road_center",
    "SceneGeometry",
    "render_scene",
    "CameraConfig",
    "Scenario",
    "Trajectory",
    "VehicleState",
    "bicycle_step",
    "run_scenario",
]
