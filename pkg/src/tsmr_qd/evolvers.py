"""Co-design algorithms: ViE-NEAT, MAP-Elites and Dual-Map MAP-Elites.

Every algorithm draws all randomness from one ``numpy`` generator, so a run is
a deterministic function of its seed and settings.  Fitness is minimized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autofd import PAPER_SCHEDULE, AutoMap, FeatureProjector
from .morphology import MAX_MODULES, N_STIFFNESS_LEVELS, MorphologyGenome, mutate_morphology, random_morphology
from .neuro import (N_OUTPUTS, ControllerGenome, InnovationRegistry, NeatConfig, NeatPopulation, minimal_genome,
                    mutate_controller)
from .physics import SimConfig, TaskSpec, aggregate, evaluate, transform_fitness
from .physics.sim import EvaluationResult
from .qd import Archive, Solution, random_selection

MORPH_DIMS = (N_STIFFNESS_LEVELS, MAX_MODULES)
EvaluateFn = Callable[[MorphologyGenome, ControllerGenome], EvaluationResult]


@dataclass
class EvolverConfig:
    budget: int = 45_000
    initial: int = 1_080
    batch: int = 24
    schedule: tuple[int, ...] = PAPER_SCHEDULE
    controller_bins: tuple[int, int] = (9, 10)
    vie_population: int = 48
    vie_mutants: int = 48
    neat: NeatConfig = field(default_factory=NeatConfig)


@dataclass
class RunResult:
    algorithm: str
    archives: dict[str, Archive]
    log: list[dict]
    events: list[dict]
    trace: list[dict] = field(default_factory=list)
    projector: FeatureProjector | None = None
    evaluations: int = 0
    best: Solution | None = None

    @property
    def morphology_archive(self) -> Archive:
        return self.archives["morphology"]


class Evaluator:
    """Counts evaluations, enforces the budget and builds solutions."""

    def __init__(self, task: TaskSpec, sim: SimConfig | None = None, fn: EvaluateFn | None = None,
                 budget: int | None = None):
        self.task = task
        self.sim = sim or SimConfig()
        self.fn = fn or (lambda m, c: evaluate(m, c, task, self.sim))
        self.budget = budget
        self.count = 0
        self.best: Solution | None = None

    @property
    def remaining(self) -> int:
        return math.inf if self.budget is None else self.budget - self.count

    def __call__(self, morphology: MorphologyGenome, controller: ControllerGenome) -> Solution:
        if self.remaining <= 0:
            raise RuntimeError("evaluation budget exhausted")
        r = self.fn(morphology, controller)
        sol = Solution(morphology, controller, float(r.fitness), r.trajectories, r.mean_distances, id=self.count)
        self.count += 1
        if self.best is None or sol.fitness < self.best.fitness:
            self.best = sol
        return sol


def mutate_pair(sol: Solution, registry: InnovationRegistry, rng: np.random.Generator,
                neat: NeatConfig | None = None) -> Solution:
    """Mutate the morphology, the controller, or both, with equal probability."""
    kind = int(rng.integers(3))
    m, c = sol.morphology, sol.controller
    if kind in (0, 2):
        m = mutate_morphology(m, rng)
    if kind in (1, 2):
        c = mutate_controller(c, registry, rng, neat)
    else:
        c = c.copy()
    return Solution(m, c)


def _morph_stats(archive: Archive, d_init: float) -> dict:
    return {"morph_qd_score": archive.qd_score(d_init), "morph_coverage": archive.coverage()}


def _log_entry(generation: int, ev: Evaluator, d_init: float, **extra) -> dict:
    best = ev.best.fitness if ev.best else math.nan
    return {"generation": generation, "evaluations": ev.count, "best_fitness": best,
            "best_fs_cm": transform_fitness(best, d_init), **extra}


def _trace_counts(trace: list[dict], generation: int) -> dict:
    ops = [t["op"] for t in trace if t["generation"] == generation]
    return {"refits": ops.count("refit"), "bound_recomputes": ops.count("recompute_bounds")}


def morphology_projection(archive: Archive) -> Archive:
    """Best solution per morphology cell of a (morphology x controller) archive."""
    out = Archive(archive.dims[:2], "morphology")
    for cell, sol in archive.items():
        out.add(sol, cell[:2])
    return out


# --------------------------------------------------------------------------
# MAP-Elites and DM-ME


def _initial_solutions(ev: Evaluator, n: int, registry: InnovationRegistry, rng: np.random.Generator,
                       n_inputs: int) -> list[Solution]:
    n = min(n, ev.remaining)
    pairs = [(random_morphology(rng), minimal_genome(n_inputs, N_OUTPUTS, rng, registry)) for _ in range(n)]
    return [ev(m, c) for m, c in pairs]


def _offspring(parents: list[Solution], registry: InnovationRegistry, rng, neat, ev: Evaluator) -> list[Solution]:
    registry.new_generation()
    n = min(len(parents), ev.remaining)
    children = [mutate_pair(p, registry, rng, neat) for p in parents[:n]]
    return [ev(c.morphology, c.controller) for c in children]


def map_elites_run(task: TaskSpec, config: EvolverConfig, rng: np.random.Generator, sim: SimConfig | None = None,
                   evaluate_fn: EvaluateFn | None = None, progress: Callable[[dict], None] | None = None) -> RunResult:
    """Single 4-D archive: morphology descriptor x automatic controller descriptor."""
    ev = Evaluator(task, sim, evaluate_fn, config.budget)
    d0 = task.initial_distance
    registry = InnovationRegistry(task.n_inputs)
    auto = AutoMap(Archive(MORPH_DIMS + tuple(config.controller_bins), "me"),
                   FeatureProjector(tuple(config.controller_bins)), tuple(config.schedule),
                   prefix=lambda s: s.morphology.descriptor)
    log = []

    def record(gen):
        entry = _log_entry(gen, ev, d0, qd_score=auto.archive.qd_score(d0), coverage=auto.archive.coverage(),
                           **_morph_stats(morphology_projection(auto.archive), d0),
                           **_trace_counts(auto.trace, gen))
        log.append(entry)
        if progress:
            progress(entry)

    auto.add_batch(_initial_solutions(ev, config.initial, registry, rng, task.n_inputs), 0)
    record(0)
    gen = 0
    while ev.remaining > 0:
        gen += 1
        parents = random_selection([auto.archive], config.batch, rng)
        auto.add_batch(_offspring(parents, registry, rng, config.neat, ev), gen)
        record(gen)
    return RunResult("me", {"me": auto.archive, "morphology": morphology_projection(auto.archive)}, log,
                     [], auto.trace, auto.projector, ev.count, ev.best)


def dm_me_run(task: TaskSpec, config: EvolverConfig, rng: np.random.Generator, sim: SimConfig | None = None,
              evaluate_fn: EvaluateFn | None = None, progress: Callable[[dict], None] | None = None) -> RunResult:
    """Two archives: hand-defined morphology map and automatic controller map."""
    ev = Evaluator(task, sim, evaluate_fn, config.budget)
    d0 = task.initial_distance
    registry = InnovationRegistry(task.n_inputs)
    a_e = Archive(MORPH_DIMS, "morphology")
    auto = AutoMap(Archive(tuple(config.controller_bins), "controller"),
                   FeatureProjector(tuple(config.controller_bins)), tuple(config.schedule))
    log = []

    def add(batch, gen):
        for s in batch:
            a_e.add(s, s.morphology.descriptor)
        auto.add_batch(batch, gen)

    def record(gen):
        entry = _log_entry(gen, ev, d0, nn_qd_score=auto.archive.qd_score(d0), nn_coverage=auto.archive.coverage(),
                           **_morph_stats(a_e, d0), **_trace_counts(auto.trace, gen))
        log.append(entry)
        if progress:
            progress(entry)

    add(_initial_solutions(ev, config.initial, registry, rng, task.n_inputs), 0)
    record(0)
    gen = 0
    while ev.remaining > 0:
        gen += 1
        parents = random_selection([a_e, auto.archive], config.batch, rng)
        add(_offspring(parents, registry, rng, config.neat, ev), gen)
        record(gen)
    return RunResult("dm-me", {"morphology": a_e, "controller": auto.archive}, log, [], auto.trace,
                     auto.projector, ev.count, ev.best)


# --------------------------------------------------------------------------
# ViE-NEAT


@dataclass
class VieMember:
    morphology: MorphologyGenome
    fitness: float = math.nan


class ViabilityEvolution:
    """Population kept under a viability boundary that only tightens.

    After each generation the boundary moves to the fitness of the
    ``population_size``-th best individual (if that is lower) and every
    individual above it is eliminated.
    """

    def __init__(self, rng: np.random.Generator, population_size: int = 48, n_mutants: int = 48):
        self.rng = rng
        self.population_size = population_size
        self.n_mutants = n_mutants
        self.population: list[VieMember] = [VieMember(random_morphology(rng)) for _ in range(population_size)]
        self.boundary = math.inf
        self.boundary_history: list[float] = []

    def mutants(self) -> list[VieMember]:
        out = []
        for _ in range(self.n_mutants):
            parent = self.population[int(self.rng.integers(len(self.population)))]
            out.append(VieMember(mutate_morphology(parent.morphology, self.rng)))
        return out

    def select(self, candidates: list[VieMember]) -> None:
        pool = [m for m in self.population + candidates if not math.isnan(m.fitness)]
        fs = sorted(m.fitness for m in pool)
        if math.isinf(self.boundary):
            self.boundary = fs[-1]
        kth = fs[min(self.population_size, len(fs)) - 1]
        self.boundary = min(self.boundary, kth)
        self.population = [m for m in pool if m.fitness <= self.boundary]
        self.boundary_history.append(self.boundary)


def pair_populations(morphs: list, controllers: list, rng: np.random.Generator) -> list[tuple]:
    """Shuffle both lists and pair them, wrapping around the shorter one."""
    a = [morphs[i] for i in rng.permutation(len(morphs))]
    b = [controllers[i] for i in rng.permutation(len(controllers))]
    n = max(len(a), len(b))
    return [(a[i % len(a)], b[i % len(b)]) for i in range(n)]


def vie_neat_run(task: TaskSpec, config: EvolverConfig, rng: np.random.Generator, sim: SimConfig | None = None,
                 evaluate_fn: EvaluateFn | None = None, progress: Callable[[dict], None] | None = None) -> RunResult:
    """Morphologies under viability evolution, controllers under NEAT, paired at random."""
    ev = Evaluator(task, sim, evaluate_fn, config.budget)
    d0 = task.initial_distance
    vie = ViabilityEvolution(rng, config.vie_population, config.vie_mutants)
    neat = NeatPopulation(task.n_inputs, rng, config.neat)
    archive = Archive(MORPH_DIMS, "morphology")
    log = []
    events: list[dict] = []
    candidates = vie.population
    vie.population = []
    gen = 0
    while True:
        pairs = pair_populations(candidates, neat.population, rng)
        pairs = pairs[:max(0, min(len(pairs), ev.remaining))]
        partner_f: dict[int, list[float]] = {}
        ctrl_f: dict[int, list[float]] = {}
        for m, c in pairs:
            sol = ev(m.morphology, c)
            archive.add(sol, m.morphology.descriptor)
            partner_f.setdefault(id(m), []).append(sol.fitness)
            ctrl_f.setdefault(id(c), []).append(sol.fitness)
        for m in candidates:
            if id(m) in partner_f:
                m.fitness = aggregate(partner_f[id(m)])
        if not partner_f:
            break
        vie.select(candidates)
        best_morph = min(m.fitness for m in vie.population)
        # NEAT reproduction at the end of the previous generation produced these
        neat_ev = [e["event"] for e in neat.events if e["generation"] == neat.generation - 1] if gen else []
        entry = _log_entry(gen, ev, d0, boundary=vie.boundary, population=len(vie.population),
                           best_population_fitness=best_morph, species=len(neat.species),
                           species_removed=neat_ev.count("species_removed"), restarts=neat_ev.count("restart"),
                           **_morph_stats(archive, d0))
        log.append(entry)
        if progress:
            progress(entry)
        if ev.remaining <= 0:
            break
        full = len(pairs) == max(len(candidates), len(neat.population))
        if not full:
            break
        for c in neat.population:
            c.fitness = aggregate(ctrl_f[id(c)])
        neat.reproduce()
        candidates = vie.mutants()
        gen += 1
    events.extend(neat.events)
    return RunResult("vie-neat", {"morphology": archive}, log, events, [], None, ev.count, ev.best)


ALGORITHMS = {"vie-neat": vie_neat_run, "me": map_elites_run, "dm-me": dm_me_run}


def run_algorithm(name: str, task: TaskSpec, config: EvolverConfig, seed: int, sim: SimConfig | None = None,
                  evaluate_fn: EvaluateFn | None = None, progress=None) -> RunResult:
    return ALGORITHMS[name](task, config, np.random.default_rng(seed), sim, evaluate_fn, progress)
