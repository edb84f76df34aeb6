"""Simulation parameters and the two locomotion tasks.

All task geometry lives in the robot's start frame: after settling, the head
module's centroid sits at the origin and the robot faces +x.  Bearings are
measured in degrees, positive to the robot's left (+y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .engine import GOAL_REACHING, SQUEEZING


@dataclass(frozen=True)
class SimConfig:
    timestep: float = 0.0025
    duration: float = 40.0
    sample_period: float = 1.0
    control_period: float = 0.05
    gravity: float = 9.81
    friction: float = 1.0
    node_mass: float = 0.01
    ground_stiffness: float = 1000.0
    ground_damping: float = 2.0
    wall_stiffness: float = 1000.0
    wall_damping: float = 2.0
    cable_damping: float = 0.02
    air_damping: float = 0.002
    amplitude: float = 0.25
    noise_sigma: float = 0.05
    freq_range: tuple[float, float] = (0.2, 2.0)
    constraint_iterations: int = 2
    settle_time: float = 10.0
    # extra per-node damping used only while settling
    settle_damping: float = 0.05
    settle_perturbation: float = 0.001

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.timestep))

    @property
    def control_every(self) -> int:
        return int(round(self.control_period / self.timestep))

    @property
    def sample_every(self) -> int:
        return int(round(self.sample_period / self.timestep))

    @property
    def n_samples(self) -> int:
        return self.n_steps // self.sample_every

    @property
    def n_control(self) -> int:
        return -(-self.n_steps // self.control_every)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "freq_range" in d:
            d["freq_range"] = tuple(d["freq_range"])
        return cls(**d)


@dataclass(frozen=True)
class Wall:
    xmin: float
    xmax: float
    ymin: float
    ymax: float


@dataclass(frozen=True)
class TaskSpec:
    name: str
    targets: tuple[tuple[float, float], ...]  # (distance m, bearing deg)
    noise_seeds: tuple[int, ...] = (0, 1)
    walls: tuple[Wall, ...] = ()
    entrance_x: float = math.inf
    aperture_width: float = 0.0
    wall_height: float = 0.12
    sensor_range: float = 0.10
    bonus_depth: float = 0.04
    bonus: float = 0.04

    @property
    def kind(self) -> int:
        return SQUEEZING if self.name == "squeeze" else GOAL_REACHING

    @property
    def n_inputs(self) -> int:
        return 5 if self.kind == SQUEEZING else 2

    @property
    def initial_distance(self) -> float:
        return self.targets[0][0]

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def target_xy(self, index: int) -> np.ndarray:
        d, b = self.targets[index]
        a = math.radians(b)
        return np.array([d * math.cos(a), d * math.sin(a)])

    @property
    def aperture_xy(self) -> np.ndarray:
        return np.array([self.entrance_x, 0.0]) if self.walls else np.zeros(2)

    def wall_array(self) -> np.ndarray:
        if not self.walls:
            return np.zeros((0, 4))
        return np.array([[w.xmin, w.xmax, w.ymin, w.ymax] for w in self.walls], dtype=np.float64)

    @classmethod
    def goal(cls, distance: float = 0.45, bearings=(90.0, 45.0, -45.0, -90.0), noise_seeds=(0, 1)) -> "TaskSpec":
        return cls("goal", tuple((distance, float(b)) for b in bearings), tuple(noise_seeds))

    @classmethod
    def squeeze(cls, distance: float = 0.60, bearings=(5.0, -5.0), noise_seeds=(0, 1),
                entrance_x: float = 0.15, aperture_width: float = 0.08, wall_length: float = 0.1667,
                wall_height: float = 0.12, half_width: float = 0.40, back_x: float = -1.30,
                thickness: float = 0.05) -> "TaskSpec":
        """Enclosure whose only exit is an aperture in the front wall.

        The front wall (``wall_length`` deep along x) is split in two boxes
        around the aperture; side walls and a back wall close the start area.
        """
        front_end = entrance_x + wall_length
        h = aperture_width / 2.0
        walls = (
            Wall(entrance_x, front_end, h, half_width + thickness),
            Wall(entrance_x, front_end, -half_width - thickness, -h),
            Wall(back_x - thickness, front_end, half_width, half_width + thickness),
            Wall(back_x - thickness, front_end, -half_width - thickness, -half_width),
            Wall(back_x - thickness, back_x, -half_width, half_width),
        )
        return cls("squeeze", tuple((distance, float(b)) for b in bearings), tuple(noise_seeds), walls,
                   entrance_x, aperture_width, wall_height)

    @classmethod
    def by_name(cls, name: str) -> "TaskSpec":
        if name == "goal":
            return cls.goal()
        if name == "squeeze":
            return cls.squeeze()
        raise ValueError(f"unknown task {name!r}")
