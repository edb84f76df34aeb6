"""Mass-spring simulation of tensegrity chains and task fitness."""
from .tasks import SimConfig, TaskSpec, Wall
from .sim import (EpisodeResult, EvaluationResult, aggregate, evaluate, settled_chain, simulate,
                  transform_fitness, write_trajectory_csv)

__all__ = ["SimConfig", "TaskSpec", "Wall", "EpisodeResult", "EvaluationResult", "aggregate", "evaluate",
           "settled_chain", "simulate", "transform_fitness", "write_trajectory_csv"]
