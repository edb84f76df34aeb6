"""Episode simulation and fitness evaluation of morphology/controller pairs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..morphology import MAX_MODULES, ChainGeometry, MorphologyGenome, build_chain
from ..neuro import ControllerGenome, FeedForwardNetwork
from .engine import GOAL_REACHING, simulate_kernel
from .tasks import SimConfig, TaskSpec

_NO_WALLS = np.zeros((0, 4))


def aggregate(distances) -> float:
    """Mean plus half the gap between worst and mean (lower is better)."""
    d = np.asarray(distances, dtype=np.float64)
    m = float(d.mean())
    return m + 0.5 * (float(d.max()) - m)


def transform_fitness(f: float, initial_distance: float) -> float:
    """Distance closed towards the targets, in centimetres (higher is better)."""
    return (initial_distance - f) * 100.0


def _kernel(chain: ChainGeometry, positions, net: FeedForwardNetwork, noise, kind, target, aperture,
            entrance_x, walls, wall_height, sensor_range, cable_k, cfg: SimConfig, n_steps, amplitude,
            record_energy=False, air_damping=None):
    return simulate_kernel(
        positions, chain.rods, chain.rod_length, chain.links, chain.link_length, chain.cables,
        chain.cable_rest, chain.cable_module, chain.front_face, chain.num_modules,
        net.input_idx, net.order, net.bias, net.in_ptr, net.in_src, net.in_w, net.output_idx, net.n_nodes,
        noise, kind, target, aperture, entrance_x, walls, wall_height, sensor_range,
        cfg.timestep, n_steps, cfg.control_every, cfg.sample_every, cfg.node_mass, cfg.gravity,
        cfg.friction, cfg.ground_stiffness, cfg.ground_damping, cfg.wall_stiffness, cfg.wall_damping,
        cable_k, cfg.cable_damping, cfg.air_damping if air_damping is None else air_damping, amplitude,
        cfg.freq_range[0], cfg.freq_range[1],
        cfg.constraint_iterations, record_energy,
    )


def _idle_network(n_inputs: int) -> FeedForwardNetwork:
    n = n_inputs + 2 * MAX_MODULES
    return FeedForwardNetwork(
        input_idx=np.arange(n_inputs, dtype=np.int64),
        order=np.arange(n_inputs, n, dtype=np.int64),
        bias=np.zeros(n),
        in_ptr=np.zeros(n - n_inputs + 1, dtype=np.int64),
        in_src=np.zeros(0, dtype=np.int64),
        in_w=np.zeros(0),
        output_idx=np.arange(n_inputs, n, dtype=np.int64),
        n_nodes=n,
    )


@lru_cache(maxsize=4096)
def settled_chain(record: str, cfg: SimConfig) -> tuple[ChainGeometry, np.ndarray]:
    """Chain geometry and its rest pose after settling under gravity.

    The pose is re-framed so the head centroid is at the origin and the head's
    front face points along +x.
    """
    g = MorphologyGenome.from_record(record)
    chain = build_chain(g)
    n_steps = int(round(cfg.settle_time / cfg.timestep))
    n_ctrl = -(-n_steps // cfg.control_every)
    x = chain.positions.copy()
    if n_steps > 0:
        # a small fixed perturbation lets balanced-but-unstable poses tip over
        # during settling rather than during the episode
        start = x + np.random.default_rng(0).uniform(-1.0, 1.0, x.shape) * cfg.settle_perturbation
        _, x, _, _, aborted, _ = _kernel(
            chain, start, _idle_network(2), np.zeros((n_ctrl, MAX_MODULES)), GOAL_REACHING,
            np.zeros(2), np.zeros(2), math.inf, _NO_WALLS, 0.0, 0.0, g.stiffness, cfg, n_steps, 0.0,
            air_damping=cfg.settle_damping)
        if aborted:
            raise RuntimeError(f"morphology {record} is unstable at rest")
    head = x[:12, :2].mean(axis=0)
    front = x[chain.front_face, :2].mean(axis=0)
    d = front - head
    ang = math.atan2(d[1], d[0])
    c, s = math.cos(-ang), math.sin(-ang)
    out = x.copy()
    out[:, 0] -= head[0]
    out[:, 1] -= head[1]
    xy = out[:, :2].copy()
    out[:, 0] = c * xy[:, 0] - s * xy[:, 1]
    out[:, 1] = s * xy[:, 0] + c * xy[:, 1]
    out.setflags(write=False)
    return chain, out


def actuation_noise(noise_seed: int, target_index: int, cfg: SimConfig) -> np.ndarray:
    """Per-control-step, per-module amplitude noise for one episode."""
    rng = np.random.default_rng([noise_seed, target_index])
    return rng.normal(0.0, cfg.noise_sigma, size=(cfg.n_control, MAX_MODULES))


@dataclass
class EpisodeResult:
    trajectory: np.ndarray  # (n_samples, 2) head centroid positions
    distance: float  # final head-to-target distance after any bonus
    raw_distance: float
    bonus_applied: bool
    aborted: bool
    max_penetration: float
    min_cable_force: float
    final_positions: np.ndarray
    energy: np.ndarray


def simulate(morphology: MorphologyGenome, controller: ControllerGenome | FeedForwardNetwork, task: TaskSpec,
             target_index: int, noise_seed: int, config: SimConfig | None = None, *,
             amplitude: float | None = None, record_energy: bool = False) -> EpisodeResult:
    cfg = config or SimConfig()
    chain, pose = settled_chain(morphology.to_record(), cfg)
    net = controller if isinstance(controller, FeedForwardNetwork) else FeedForwardNetwork.from_genome(controller)
    if len(net.input_idx) != task.n_inputs:
        raise ValueError(f"controller has {len(net.input_idx)} inputs, task needs {task.n_inputs}")
    target = task.target_xy(target_index)
    amp = cfg.amplitude if amplitude is None else amplitude
    traj, x, max_pen, min_force, aborted, energy = _kernel(
        chain, np.array(pose), net, actuation_noise(noise_seed, target_index, cfg), task.kind, target,
        task.aperture_xy, task.entrance_x, task.wall_array(), task.wall_height, task.sensor_range,
        morphology.stiffness, cfg, cfg.n_steps, amp, record_energy)
    traj = np.where(np.isfinite(traj), traj, 0.0)
    d_init = task.initial_distance
    if aborted:
        return EpisodeResult(traj, d_init, d_init, False, True, float(max_pen), float(min_force), x, energy)
    head = x[:12, :2].mean(axis=0)
    raw = float(np.hypot(*(head - target)))
    bonus = bool(task.walls) and max_pen >= task.bonus_depth
    dist = raw - task.bonus if bonus else raw
    return EpisodeResult(traj, dist, raw, bonus, False, float(max_pen), float(min_force), x, energy)


@dataclass
class EvaluationResult:
    fitness: float
    mean_distances: np.ndarray  # (n_targets,)
    distances: np.ndarray  # (n_targets, n_seeds)
    trajectories: np.ndarray  # (n_targets, n_samples, 2), averaged over noise seeds
    aborted: np.ndarray  # (n_targets, n_seeds)
    bonus: np.ndarray  # (n_targets, n_seeds)
    seed_trajectories: np.ndarray | None = None  # (n_targets, n_seeds, n_samples, 2)

    @property
    def sensory_data(self) -> np.ndarray:
        return self.trajectories.reshape(-1)


def evaluate(morphology: MorphologyGenome, controller: ControllerGenome, task: TaskSpec,
             config: SimConfig | None = None) -> EvaluationResult:
    """Run every target with every noise seed and aggregate the distances."""
    cfg = config or SimConfig()
    net = FeedForwardNetwork.from_genome(controller)
    nt, ns = task.n_targets, len(task.noise_seeds)
    dist = np.zeros((nt, ns))
    ab = np.zeros((nt, ns), dtype=bool)
    bon = np.zeros((nt, ns), dtype=bool)
    per_seed = np.zeros((nt, ns, cfg.n_samples, 2))
    for t in range(nt):
        for k, seed in enumerate(task.noise_seeds):
            r = simulate(morphology, net, task, t, seed, cfg)
            dist[t, k] = r.distance
            ab[t, k] = r.aborted
            bon[t, k] = r.bonus_applied
            per_seed[t, k] = r.trajectory
    mean_d = dist.mean(axis=1)
    return EvaluationResult(aggregate(mean_d), mean_d, dist, per_seed.mean(axis=1), ab, bon, per_seed)


def write_trajectory_csv(path, trajectories: np.ndarray, sample_period: float = 1.0, seeds=None):
    """Write head trajectories shaped (targets, seeds, samples, 2) as rows
    (target, seed, t, x, y).  A (targets, samples, 2) array is written with
    seed ``mean``."""
    traj = np.asarray(trajectories)
    if traj.ndim == 3:
        traj = traj[:, None]
        seeds = ["mean"]
    seeds = list(seeds) if seeds is not None else list(range(traj.shape[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "seed", "t", "x", "y"])
        for t in range(traj.shape[0]):
            for k in range(traj.shape[1]):
                for i in range(traj.shape[2]):
                    w.writerow([t, seeds[k], f"{(i + 1) * sample_period:g}", repr(float(traj[t, k, i, 0])),
                                repr(float(traj[t, k, i, 1]))])
