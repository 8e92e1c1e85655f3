"""Cooperative two-robot transport of a rigid load with mobile manipulators."""

from .config import SimConfig, load_config
from .core import JointState, KinematicChain, Pose2D, RobotConfig, Trajectory3D, VelocityCommand, wrap_angle
from .logs import SimulationLog, load_length_series, read_log_csv, summarize, tracking_error_series, write_log_csv
from .scenario import Scenario, build_benchmark_scenario
from .sync import run_simulation

__version__ = "0.1.0"

__all__ = [
    "JointState",
    "KinematicChain",
    "Pose2D",
    "RobotConfig",
    "Scenario",
    "SimConfig",
    "SimulationLog",
    "Trajectory3D",
    "VelocityCommand",
    "build_benchmark_scenario",
    "load_config",
    "load_length_series",
    "read_log_csv",
    "run_simulation",
    "summarize",
    "tracking_error_series",
    "wrap_angle",
    "write_log_csv",
]
