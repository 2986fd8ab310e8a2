"""Offline multi-camera vehicle trajectory association.

Single-camera trajectories (one appearance descriptor each) become nodes of a
cross-camera graph; a small message-passing network classifies each edge as
same-vehicle or not, and connected components plus constraint-driven
refinement produce global multi-camera trajectories. Training uses plain SGD
with warmup/decay and an imbalance-aware loss (per-batch class weights plus a
differentiable false-positive-rate term).
"""

from .clustering import (
    ClusterSet,
    GlobalTrajectories,
    GlobalTrajectory,
    connected_components,
    infer,
    load_clusters,
    prune_edges,
    refine_clusters,
    save_clusters,
)
from .data import (
    DEFAULT_DIM,
    DataFormatError,
    TrajectoryRecord,
    TrajectorySet,
    average_descriptors,
    load_trajectories,
    save_trajectories,
)
from .estimator import TrajectoryAssociator, check_trajectory_set
from .graph import AssociationGraph, build_graph, edge_raw_features, span_gap
from .loss import LossBreakdown, class_weights, hard_fpr, soft_fpr, total_loss, weighted_ce
from .metrics import MetricsReport, id_metrics, save_metrics
from .network import (
    ModelConfig,
    ModelParameters,
    backward,
    forward,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
    small_config,
)
from .synth import SynthConfig, generate_scenario
from .training import TrainConfig, lr_schedule, sample_batch, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "AssociationGraph",
    "ClusterSet",
    "DEFAULT_DIM",
    "DataFormatError",
    "GlobalTrajectories",
    "GlobalTrajectory",
    "LossBreakdown",
    "MetricsReport",
    "ModelConfig",
    "ModelParameters",
    "SynthConfig",
    "TrainConfig",
    "TrajectoryAssociator",
    "TrajectoryRecord",
    "TrajectorySet",
    "average_descriptors",
    "backward",
    "build_graph",
    "check_trajectory_set",
    "class_weights",
    "connected_components",
    "edge_raw_features",
    "forward",
    "generate_scenario",
    "hard_fpr",
    "id_metrics",
    "infer",
    "init_parameters",
    "load_checkpoint",
    "load_clusters",
    "load_trajectories",
    "lr_schedule",
    "prune_edges",
    "refine_clusters",
    "sample_batch",
    "save_checkpoint",
    "save_clusters",
    "save_metrics",
    "save_trajectories",
    "sgd_step",
    "small_config",
    "soft_fpr",
    "span_gap",
    "total_loss",
    "train",
    "weighted_ce",
]
