"""Conservative exploration for multi-armed and linear bandits.

Library plus CLI: optimistic and conservative policies sharing one
confidence-ellipsoid machinery, bandit environments, and a reproducible
experiment harness emitting plot-ready CSV/JSON artifacts.
"""

__version__ = "0.1.0"

from .agents import (
    Agent,
    AgentConfig,
    AgentDecision,
    Event,
    HistoryLedger,
    VARIANTS,
    clucb_condition,
    constrained_select,
    safe_set,
    ucb_select,
)
from .confidence import BoundParams, ConfidenceEllipsoid, beta, martingale_bound
from .config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .environments import (
    BanditModel,
    BaselineInfo,
    DatasetFormatError,
    ModelGenerationError,
    baseline_info,
    gen_bernoulli_model,
    gen_linear_model,
    load_dataset_model,
    pull,
    write_synthetic_dataset,
)
from .harness import (
    ExperimentSummary,
    RunRecord,
    RunTrace,
    SweepPoint,
    checkpoint_sweep,
    downsample_grid,
    event_frequency,
    improvement_ratios,
    log_spaced_checkpoints,
    replicate,
    run_one,
    select_model,
)
from .rls import RlsState

__all__ = [
    "Agent",
    "AgentConfig",
    "AgentDecision",
    "BanditModel",
    "BaselineInfo",
    "BoundParams",
    "ConfidenceEllipsoid",
    "ConfigError",
    "DatasetFormatError",
    "Event",
    "ExperimentConfig",
    "ExperimentSummary",
    "HistoryLedger",
    "ModelGenerationError",
    "RlsState",
    "RunRecord",
    "RunTrace",
    "SweepPoint",
    "VARIANTS",
    "baseline_info",
    "beta",
    "checkpoint_sweep",
    "clucb_condition",
    "constrained_select",
    "downsample_grid",
    "event_frequency",
    "gen_bernoulli_model",
    "gen_linear_model",
    "improvement_ratios",
    "load_dataset_model",
    "log_spaced_checkpoints",
    "martingale_bound",
    "parse_config",
    "pull",
    "replicate",
    "run_one",
    "safe_set",
    "select_model",
    "serialize_config",
    "ucb_select",
    "write_synthetic_dataset",
]
