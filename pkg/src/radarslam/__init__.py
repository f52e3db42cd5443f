"""Radar EKF-SLAM workbench with rule-based landmark management."""

from .landmarks import ManagerConfig
from .scenario import ScenarioFile, bundled_scenario, load_scenario, parse_scenario
from .simulator import ClutterBurst, Scene, TrajectorySegment, VehicleTruth
from .slam import RunResult, SlamConfig, StepError, StepLog, run, step
from .state import AugmentedState, Pose

__version__ = "0.1.0"

__all__ = [
    "AugmentedState", "ClutterBurst", "ManagerConfig", "Pose", "RunResult", "Scene", "ScenarioFile",
    "SlamConfig", "StepError", "StepLog", "TrajectorySegment", "VehicleTruth", "bundled_scenario",
    "load_scenario", "parse_scenario", "run", "step",
]
