"""Layered binary Boltzmann machines with mode-assisted training."""

from .data import BinaryDataset, IdxFormatError, binarize, load_idx, shifting_bar
from .gibbs import GibbsChain, PairStatistics, cd_statistics, data_statistics, gibbs_sweep
from .harness import ExperimentConfig, aggregate, resolve_shape, run_experiment
from .likelihood import (
    PartitionEstimate,
    ais_avg_ll,
    ais_log_z,
    exact_avg_ll,
    exact_log_z,
    kl_divergence,
    marginal_log_p,
)
from .meanfield import MeanFieldState, elbo, mf_fixed_point
from .model import (
    CapacityError,
    DbmParams,
    JointState,
    LayerShape,
    efficiency,
    energy,
    layer_conditional,
    param_count,
)
from .modes import AnnealSchedule, ModeQuery, ModeResult, anneal_mode, exact_mode, mode_statistics
from .training import ScheduleParams, TrainConfig, TrainTrace, learning_rate, mode_probability, train

__all__ = [
    "AnnealSchedule",
    "BinaryDataset",
    "CapacityError",
    "DbmParams",
    "ExperimentConfig",
    "GibbsChain",
    "IdxFormatError",
    "JointState",
    "LayerShape",
    "MeanFieldState",
    "ModeQuery",
    "ModeResult",
    "PairStatistics",
    "PartitionEstimate",
    "ScheduleParams",
    "TrainConfig",
    "TrainTrace",
    "aggregate",
    "ais_avg_ll",
    "ais_log_z",
    "anneal_mode",
    "binarize",
    "cd_statistics",
    "data_statistics",
    "efficiency",
    "elbo",
    "energy",
    "exact_avg_ll",
    "exact_log_z",
    "exact_mode",
    "gibbs_sweep",
    "kl_divergence",
    "layer_conditional",
    "learning_rate",
    "load_idx",
    "marginal_log_p",
    "mf_fixed_point",
    "mode_probability",
    "mode_statistics",
    "param_count",
    "resolve_shape",
    "run_experiment",
    "shifting_bar",
    "train",
]
