from .config import ConfigError, ExperimentConfig, build_config, config_keys, load_config_file, parse_override
from .experiment import aggregate, export_runs, run_experiment
from .learners import LEARNERS, Learner, make_learner
from .loop import METRIC_COLUMNS, MetricsRow, Trial, build_env, evaluate, rollout, run_trial, trial_streams

__all__ = [
    "ConfigError", "ExperimentConfig", "build_config", "config_keys", "load_config_file", "parse_override",
    "aggregate", "export_runs", "run_experiment", "LEARNERS", "Learner", "make_learner",
    "METRIC_COLUMNS", "MetricsRow", "Trial", "build_env", "evaluate", "rollout", "run_trial", "trial_streams",
]
