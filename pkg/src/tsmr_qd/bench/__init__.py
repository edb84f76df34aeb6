"""Experiment presets, runners, statistics and reporting."""
from .config import ExperimentConfig, desk_preset, load_config, paper_preset, preset
from .runner import run_experiment, run_seeds
from .stats import RankSumResult, describe, rank_sum

__all__ = ["ExperimentConfig", "desk_preset", "load_config", "paper_preset", "preset", "run_experiment",
           "run_seeds", "RankSumResult", "describe", "rank_sum"]
