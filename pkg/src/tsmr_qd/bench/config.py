"""Experiment configuration with the full-scale and desk-scale presets."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..autofd import DESK_SCHEDULE, PAPER_SCHEDULE
from ..evolvers import ALGORITHMS, EvolverConfig
from ..neuro import NeatConfig
from ..physics import SimConfig, TaskSpec


@dataclass
class ExperimentConfig:
    preset: str = "paper"
    task: str = "goal"
    algorithms: tuple[str, ...] = ("vie-neat", "me", "dm-me")
    runs: int = 10
    seed: int = 0
    budget: int = 45_000
    initial: int = 1_080
    batch: int = 24
    schedule: tuple[int, ...] = PAPER_SCHEDULE
    controller_bins: tuple[int, int] = (9, 10)
    vie_population: int = 48
    vie_mutants: int = 48
    neat: NeatConfig = field(default_factory=NeatConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if self.task not in ("goal", "squeeze"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.initial > self.budget:
            raise ValueError("initial population exceeds the evaluation budget")

    def task_spec(self) -> TaskSpec:
        return TaskSpec.by_name(self.task)

    def evolver(self) -> EvolverConfig:
        return EvolverConfig(self.budget, self.initial, self.batch, tuple(self.schedule), tuple(self.controller_bins),
                             self.vie_population, self.vie_mutants, self.neat)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        d["schedule"] = list(self.schedule)
        d["controller_bins"] = list(self.controller_bins)
        d["sim"]["freq_range"] = list(self.sim.freq_range)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        """Start from the named preset and override with the given keys."""
        d = dict(d)
        base = preset(d.pop("preset", "paper"))
        kw = {}
        for k, v in d.items():
            if k == "neat":
                kw[k] = replace(base.neat, **v)
            elif k == "sim":
                kw[k] = SimConfig.from_dict({**base.sim.to_dict(), **v})
            elif k in ("algorithms", "schedule", "controller_bins"):
                kw[k] = tuple(v)
            elif k in {f.name for f in fields(cls)}:
                kw[k] = v
            else:
                raise KeyError(f"unknown configuration key {k!r}")
        return replace(base, **kw)


def paper_preset() -> ExperimentConfig:
    return ExperimentConfig()


def desk_preset() -> ExperimentConfig:
    return ExperimentConfig(preset="desk", runs=3, budget=2_400, initial=240, schedule=DESK_SCHEDULE)


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}") from None


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))
