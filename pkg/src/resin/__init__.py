"""Decentralized GP learning, fusion, and planning for multi-sensor tracking."""

__version__ = "0.1.0"

from .world import (ControlBounds, ControlInput, Measurement, SensorState,
                    TargetState, TrajectoryGenerator, WorkspaceSpec, in_fov,
                    sense, step_sensor, step_target)
from .gp import (GpModel, KernelParams, TrajectoryGaussian,
                 VelocityPrediction, fit_hyperparameters, gp_predict, ingest,
                 kernel_eval, local_trajectory_pdf, nominal_path)
from .fusion import (FusedTrajectory, FusionWeights, beta_weight,
                     chernoff_weight, fuse_pair, tree_fuse)
from .planner import (DetectionCounts, PlanResult, PlanningPrior, objective,
                      optimize_local, predecessor_update, psi_weight,
                      sequential_round, step_mi)
from .network import MessageLedger, MessageRecord, TreeTopology, build_topology
from .config import ScenarioConfig, builtin_config, load_config
from .bench import MetricsRow, RunResult, emit_outputs, run_scenario

__all__ = [
    "ControlBounds", "ControlInput", "Measurement", "SensorState",
    "TargetState", "TrajectoryGenerator", "WorkspaceSpec", "in_fov", "sense",
    "step_sensor", "step_target",
    "GpModel", "KernelParams", "TrajectoryGaussian", "VelocityPrediction",
    "fit_hyperparameters", "gp_predict", "ingest", "kernel_eval",
    "local_trajectory_pdf", "nominal_path",
    "FusedTrajectory", "FusionWeights", "beta_weight", "chernoff_weight",
    "fuse_pair", "tree_fuse",
    "DetectionCounts", "PlanResult", "PlanningPrior", "objective",
    "optimize_local", "predecessor_update", "psi_weight", "sequential_round",
    "step_mi",
    "MessageLedger", "MessageRecord", "TreeTopology", "build_topology",
    "ScenarioConfig", "builtin_config", "load_config",
    "MetricsRow", "RunResult", "emit_outputs", "run_scenario",
]
