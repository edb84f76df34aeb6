"""NEAT-style controller genomes and a small generational NEAT population.

Genomes are feed-forward: every operator keeps the graph of enabled
connections acyclic.  Fitness is minimized.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

INPUT, HIDDEN, OUTPUT = "input", "hidden", "output"
N_OUTPUTS = 20


class StructuralError(RuntimeError):
    """Raised when a genome decodes to a cyclic graph."""


@dataclass
class NodeGene:
    id: int
    kind: str
    bias: float = 0.0

    @property
    def activation(self) -> str:
        return "identity" if self.kind == INPUT else "sigmoid"


@dataclass
class ConnectionGene:
    innovation: int
    src: int
    dst: int
    weight: float
    enabled: bool = True


@dataclass
class NeatConfig:
    population_size: int = 54
    elitism: int = 3
    species_elitism: int = 2
    compatibility_threshold: float = 2.85
    # common NEAT defaults, not fixed by the experiment tables
    excess_coefficient: float = 1.0
    disjoint_coefficient: float = 1.0
    weight_coefficient: float = 0.5
    max_stagnation: int = 15
    crossover_prob: float = 0.75
    survival_threshold: float = 0.2
    min_species_size: int = 2
    weight_mutate_prob: float = 0.8
    weight_replace_prob: float = 0.1
    weight_mutate_power: float = 0.5
    bias_mutate_prob: float = 0.8
    bias_replace_prob: float = 0.1
    bias_mutate_power: float = 0.5
    add_connection_prob: float = 0.1
    add_node_prob: float = 0.05
    toggle_enable_prob: float = 0.02
    keep_disabled_prob: float = 0.75


@dataclass
class ControllerGenome:
    input_count: int
    output_count: int
    nodes: dict[int, NodeGene] = field(default_factory=dict)
    connections: dict[int, ConnectionGene] = field(default_factory=dict)
    key: int = -1
    fitness: float | None = None

    @property
    def input_ids(self) -> list[int]:
        return list(range(self.input_count))

    @property
    def output_ids(self) -> list[int]:
        return list(range(self.input_count, self.input_count + self.output_count))

    def copy(self) -> "ControllerGenome":
        """Independent copy of the genes; fitness is reset, the key kept."""
        return ControllerGenome(
            self.input_count, self.output_count,
            {k: NodeGene(n.id, n.kind, n.bias) for k, n in self.nodes.items()},
            {k: ConnectionGene(c.innovation, c.src, c.dst, c.weight, c.enabled) for k, c in self.connections.items()},
            self.key,
        )

    def structure(self) -> tuple:
        """Hashable view of the genes (ignores key and fitness)."""
        nodes = tuple(sorted((n.id, n.kind, n.bias) for n in self.nodes.values()))
        conns = tuple(sorted((c.innovation, c.src, c.dst, c.weight, c.enabled) for c in self.connections.values()))
        return (self.input_count, self.output_count, nodes, conns)

    def to_record(self) -> str:
        return json.dumps({
            "inputs": self.input_count,
            "outputs": self.output_count,
            "nodes": [[n.id, n.kind, n.bias] for n in sorted(self.nodes.values(), key=lambda n: n.id)],
            "connections": [[c.innovation, c.src, c.dst, c.weight, c.enabled]
                            for c in sorted(self.connections.values(), key=lambda c: c.innovation)],
        }, sort_keys=True)

    @classmethod
    def from_record(cls, record: str) -> "ControllerGenome":
        d = json.loads(record)
        g = cls(d["inputs"], d["outputs"])
        for nid, kind, bias in d["nodes"]:
            g.nodes[nid] = NodeGene(nid, kind, bias)
        for inn, src, dst, w, en in d["connections"]:
            g.connections[inn] = ConnectionGene(inn, src, dst, w, en)
        return g


class InnovationRegistry:
    """Hands out innovation numbers and hidden node ids.

    Connections of the minimal topology have fixed numbers.  Other structural
    events are remembered for the current generation only, so identical
    mutations in one generation share their numbers.
    """

    def __init__(self, input_count: int, output_count: int = N_OUTPUTS):
        self.input_count = input_count
        self.output_count = output_count
        self._base = {}
        for i in range(input_count):
            for o in range(output_count):
                self._base[(i, input_count + o)] = i * output_count + o
        self.next_innovation = input_count * output_count
        self.next_node_id = input_count + output_count
        self._connection_events: dict[tuple[int, int], int] = {}
        self._split_events: dict[int, tuple[int, int, int]] = {}

    def new_generation(self):
        self._connection_events.clear()
        self._split_events.clear()

    def connection(self, src: int, dst: int) -> int:
        if (src, dst) in self._base:
            return self._base[(src, dst)]
        if (src, dst) not in self._connection_events:
            self._connection_events[(src, dst)] = self.next_innovation
            self.next_innovation += 1
        return self._connection_events[(src, dst)]

    def split(self, innovation: int) -> tuple[int, int, int]:
        """(new node id, innovation of src->new, innovation of new->dst)."""
        if innovation not in self._split_events:
            node = self.next_node_id
            self.next_node_id += 1
            self._split_events[innovation] = (node, self.next_innovation, self.next_innovation + 1)
            self.next_innovation += 2
        return self._split_events[innovation]


def minimal_genome(input_count: int, output_count: int, rng: np.random.Generator,
                   registry: InnovationRegistry | None = None) -> ControllerGenome:
    if registry is None:
        registry = InnovationRegistry(input_count, output_count)
    g = ControllerGenome(input_count, output_count)
    for i in g.input_ids:
        g.nodes[i] = NodeGene(i, INPUT, 0.0)
    for o in g.output_ids:
        g.nodes[o] = NodeGene(o, OUTPUT, float(rng.normal()))
    for i in g.input_ids:
        for o in g.output_ids:
            inn = registry.connection(i, o)
            g.connections[inn] = ConnectionGene(inn, i, o, float(rng.normal()), True)
    return g


# --------------------------------------------------------------------------
# decoding


def _topological_order(node_ids, edges) -> list[int]:
    indeg = {n: 0 for n in node_ids}
    out = {n: [] for n in node_ids}
    for s, d in edges:
        indeg[d] += 1
        out[s].append(d)
    ready = sorted(n for n, k in indeg.items() if k == 0)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for d in out[n]:
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
    if len(order) != len(indeg):
        raise StructuralError("enabled connections contain a cycle")
    return order


def is_acyclic(g: ControllerGenome) -> bool:
    try:
        _topological_order(g.nodes, [(c.src, c.dst) for c in g.connections.values() if c.enabled])
    except StructuralError:
        return False
    return True


def _creates_cycle(edges: set[tuple[int, int]], src: int, dst: int) -> bool:
    """Would adding src->dst close a cycle, i.e. is src reachable from dst?"""
    adj: dict[int, list[int]] = {}
    for s, d in edges:
        adj.setdefault(s, []).append(d)
    return _reaches(adj, dst, src)


def _reaches(adj: dict[int, list[int]], start: int, goal: int) -> bool:
    if start == goal:
        return True
    stack, seen = [start], {start}
    while stack:
        n = stack.pop()
        for m in adj.get(n, ()):
            if m == goal:
                return True
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False


@dataclass
class FeedForwardNetwork:
    """Flat arrays consumed by the simulator's network kernel."""

    input_idx: np.ndarray
    order: np.ndarray
    bias: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    in_w: np.ndarray
    output_idx: np.ndarray
    n_nodes: int

    @classmethod
    def from_genome(cls, g: ControllerGenome) -> "FeedForwardNetwork":
        enabled = [c for c in g.connections.values() if c.enabled]
        topo = _topological_order(g.nodes, [(c.src, c.dst) for c in enabled])
        index = {nid: k for k, nid in enumerate(sorted(g.nodes))}
        incoming: dict[int, list[ConnectionGene]] = {}
        for c in sorted(enabled, key=lambda c: c.innovation):
            incoming.setdefault(c.dst, []).append(c)
        inputs = set(g.input_ids)
        order, ptr, src, w = [], [0], [], []
        for nid in topo:
            if nid in inputs:
                continue
            order.append(index[nid])
            for c in incoming.get(nid, ()):
                src.append(index[c.src])
                w.append(c.weight)
            ptr.append(len(src))
        bias = np.zeros(len(index))
        for nid, n in g.nodes.items():
            bias[index[nid]] = n.bias
        return cls(
            input_idx=np.array([index[i] for i in g.input_ids], dtype=np.int64),
            order=np.array(order, dtype=np.int64),
            bias=bias,
            in_ptr=np.array(ptr, dtype=np.int64),
            in_src=np.array(src, dtype=np.int64),
            in_w=np.array(w, dtype=np.float64),
            output_idx=np.array([index[o] for o in g.output_ids], dtype=np.int64),
            n_nodes=len(index),
        )

    def activate(self, inputs) -> np.ndarray:
        from .physics.engine import run_network

        values = np.zeros(self.n_nodes)
        out = np.zeros(len(self.output_idx))
        run_network(values, np.asarray(inputs, dtype=np.float64), self.input_idx, self.order, self.bias,
                    self.in_ptr, self.in_src, self.in_w, self.output_idx, out)
        return out


def decode_and_eval(g: ControllerGenome, inputs) -> np.ndarray:
    if len(inputs) != g.input_count:
        raise ValueError(f"expected {g.input_count} inputs, got {len(inputs)}")
    return FeedForwardNetwork.from_genome(g).activate(inputs)


# --------------------------------------------------------------------------
# variation


def mutate_controller(g: ControllerGenome, registry: InnovationRegistry, rng: np.random.Generator,
                      config: NeatConfig | None = None) -> ControllerGenome:
    cfg = config or NeatConfig()
    child = g.copy()

    for c in sorted(child.connections.values(), key=lambda c: c.innovation):
        if rng.random() < cfg.weight_mutate_prob:
            if rng.random() < cfg.weight_replace_prob:
                c.weight = float(rng.normal())
            else:
                c.weight += float(rng.normal(0.0, cfg.weight_mutate_power))
    for n in sorted(child.nodes.values(), key=lambda n: n.id):
        if n.kind != INPUT and rng.random() < cfg.bias_mutate_prob:
            if rng.random() < cfg.bias_replace_prob:
                n.bias = float(rng.normal())
            else:
                n.bias += float(rng.normal(0.0, cfg.bias_mutate_power))

    if rng.random() < cfg.add_connection_prob:
        _add_connection(child, registry, rng)
    if rng.random() < cfg.add_node_prob:
        _add_node(child, registry, rng)
    if rng.random() < cfg.toggle_enable_prob:
        _toggle_enable(child, rng)
    return child


def _enabled_edges(g: ControllerGenome) -> set[tuple[int, int]]:
    return {(c.src, c.dst) for c in g.connections.values() if c.enabled}


def _descendants(node_ids, edges) -> dict[int, set[int]]:
    """Nodes reachable from each node along ``edges`` (which must be acyclic)."""
    out: dict[int, list[int]] = {n: [] for n in node_ids}
    for s, d in edges:
        out[s].append(d)
    reach: dict[int, set[int]] = {}
    for n in reversed(_topological_order(node_ids, edges)):
        r = set()
        for d in out[n]:
            r.add(d)
            r |= reach[d]
        reach[n] = r
    return reach


def _add_connection(g: ControllerGenome, registry: InnovationRegistry, rng: np.random.Generator):
    existing = {(c.src, c.dst) for c in g.connections.values()}
    reach = _descendants(g.nodes, _enabled_edges(g))
    sources = sorted(n.id for n in g.nodes.values() if n.kind != OUTPUT)
    targets = sorted(n.id for n in g.nodes.values() if n.kind != INPUT)
    # s -> d closes a cycle exactly when s is reachable from d
    candidates = [(s, d) for s in sources for d in targets
                  if (s, d) not in existing and s != d and s not in reach[d]]
    if not candidates:
        return
    s, d = candidates[int(rng.integers(len(candidates)))]
    inn = registry.connection(s, d)
    g.connections[inn] = ConnectionGene(inn, s, d, float(rng.normal()), True)


def _add_node(g: ControllerGenome, registry: InnovationRegistry, rng: np.random.Generator):
    enabled = sorted((c for c in g.connections.values() if c.enabled), key=lambda c: c.innovation)
    if not enabled:
        return
    old = enabled[int(rng.integers(len(enabled)))]
    node, in_inn, out_inn = registry.split(old.innovation)
    if node in g.nodes:
        return
    old.enabled = False
    g.nodes[node] = NodeGene(node, HIDDEN, 0.0)
    g.connections[in_inn] = ConnectionGene(in_inn, old.src, node, 1.0, True)
    g.connections[out_inn] = ConnectionGene(out_inn, node, old.dst, old.weight, True)


def _toggle_enable(g: ControllerGenome, rng: np.random.Generator):
    conns = sorted(g.connections.values(), key=lambda c: c.innovation)
    if not conns:
        return
    c = conns[int(rng.integers(len(conns)))]
    if c.enabled:
        c.enabled = False
    elif not _creates_cycle(_enabled_edges(g), c.src, c.dst):
        c.enabled = True


def crossover(parent1: ControllerGenome, parent2: ControllerGenome, rng: np.random.Generator,
              config: NeatConfig | None = None) -> ControllerGenome:
    """Offspring takes its structure from the fitter parent (``parent1`` on ties).

    Matching genes pick attributes from either parent at random.  Any enabled
    gene that would close a cycle in the offspring is disabled.
    """
    cfg = config or NeatConfig()
    f1 = math.inf if parent1.fitness is None else parent1.fitness
    f2 = math.inf if parent2.fitness is None else parent2.fitness
    fit, other = (parent2, parent1) if f2 < f1 else (parent1, parent2)

    child = ControllerGenome(fit.input_count, fit.output_count)
    for nid in sorted(fit.nodes):
        n = fit.nodes[nid]
        m = other.nodes.get(nid)
        bias = n.bias if m is None or rng.random() < 0.5 else m.bias
        child.nodes[nid] = NodeGene(nid, n.kind, bias)
    for inn in sorted(fit.connections):
        c = fit.connections[inn]
        d = other.connections.get(inn)
        if d is None:
            child.connections[inn] = ConnectionGene(inn, c.src, c.dst, c.weight, c.enabled)
            continue
        w = c.weight if rng.random() < 0.5 else d.weight
        enabled = True
        if not c.enabled or not d.enabled:
            enabled = not (rng.random() < cfg.keep_disabled_prob)
        child.connections[inn] = ConnectionGene(inn, c.src, c.dst, w, enabled)

    adj: dict[int, list[int]] = {}
    for inn in sorted(child.connections):
        c = child.connections[inn]
        if not c.enabled:
            continue
        if _reaches(adj, c.dst, c.src):
            c.enabled = False
        else:
            adj.setdefault(c.src, []).append(c.dst)
    return child


def compatibility(g1: ControllerGenome, g2: ControllerGenome, config: NeatConfig | None = None) -> float:
    cfg = config or NeatConfig()
    i1, i2 = set(g1.connections), set(g2.connections)
    if not i1 and not i2:
        return 0.0
    max1 = max(i1) if i1 else -1
    max2 = max(i2) if i2 else -1
    excess = disjoint = 0
    for inn in i1 ^ i2:
        if (inn in i1 and inn > max2) or (inn in i2 and inn > max1):
            excess += 1
        else:
            disjoint += 1
    matching = i1 & i2
    wbar = (sum(abs(g1.connections[i].weight - g2.connections[i].weight) for i in matching) / len(matching)
            if matching else 0.0)
    n = max(len(i1), len(i2), 1)
    return (cfg.excess_coefficient * excess / n + cfg.disjoint_coefficient * disjoint / n
            + cfg.weight_coefficient * wbar)


# --------------------------------------------------------------------------
# speciation and reproduction


@dataclass
class Species:
    key: int
    representative: ControllerGenome
    members: list[ControllerGenome] = field(default_factory=list)
    best_history: list[float] = field(default_factory=list)
    best_ever: float = math.inf
    last_improved: int = 0

    def stagnation(self, generation: int) -> int:
        return generation - self.last_improved

    @property
    def best_fitness(self) -> float:
        return min(m.fitness for m in self.members)


class NeatPopulation:
    """Generational NEAT with individual and species elitism.

    ``population`` holds the current genomes; callers set ``genome.fitness``
    on each of them before calling :meth:`reproduce`.
    """

    def __init__(self, input_count: int, rng: np.random.Generator, config: NeatConfig | None = None,
                 output_count: int = N_OUTPUTS):
        self.config = config or NeatConfig()
        self.input_count = input_count
        self.output_count = output_count
        self.registry = InnovationRegistry(input_count, output_count)
        self.rng = rng
        self.generation = 0
        self._next_key = 0
        self._next_species = 0
        self.species: list[Species] = []
        self.events: list[dict] = []
        self.population = [self._keyed(minimal_genome(input_count, output_count, rng, self.registry))
                           for _ in range(self.config.population_size)]

    def _keyed(self, g: ControllerGenome) -> ControllerGenome:
        g.key = self._next_key
        self._next_key += 1
        return g

    def speciate(self):
        cfg = self.config
        unassigned = list(self.population)
        new_species = []
        for sp in self.species:
            if not unassigned:
                break
            rep = min(unassigned, key=lambda g: compatibility(g, sp.representative, cfg))
            if compatibility(rep, sp.representative, cfg) > cfg.compatibility_threshold:
                continue
            sp.representative = rep
            sp.members = []
            new_species.append(sp)
        for g in unassigned:
            for sp in new_species:
                if compatibility(g, sp.representative, cfg) <= cfg.compatibility_threshold:
                    sp.members.append(g)
                    break
            else:
                sp = Species(self._next_species, g, [g], last_improved=self.generation)
                self._next_species += 1
                new_species.append(sp)
        self.species = [sp for sp in new_species if sp.members]

    def reproduce(self) -> list[ControllerGenome]:
        """One generation: speciate, cull stagnant species, breed."""
        cfg, rng = self.config, self.rng
        if any(g.fitness is None for g in self.population):
            raise ValueError("every genome needs a fitness before reproduction")
        self.registry.new_generation()
        self.speciate()

        for sp in self.species:
            best = sp.best_fitness
            sp.best_history.append(best)
            if best < sp.best_ever:
                sp.best_ever = best
                sp.last_improved = self.generation
        ranked = sorted(self.species, key=lambda s: (s.best_fitness, s.key))
        protected = {s.key for s in ranked[:cfg.species_elitism]}
        survivors = [s for s in self.species
                     if s.key in protected or s.stagnation(self.generation) <= cfg.max_stagnation]
        removed = [s.key for s in self.species if s not in survivors]
        if removed:
            self.events.append({"generation": self.generation, "event": "species_removed", "species": removed})

        elites = sorted(self.population, key=lambda g: (g.fitness, g.key))[:cfg.elitism]

        if not survivors:
            self.events.append({"generation": self.generation, "event": "restart"})
            self.species = []
            new_pop = [self._keyed(minimal_genome(self.input_count, self.output_count, rng, self.registry))
                       for _ in range(cfg.population_size)]
            self.population = new_pop
            self.generation += 1
            return new_pop

        # rank-based adjusted fitness: best genome scores 1, worst 1/N
        members = sorted((g for s in survivors for g in s.members), key=lambda g: (g.fitness, g.key))
        n = len(members)
        score = {g.key: (n - r) / n for r, g in enumerate(members)}
        adjusted = np.array([np.mean([score[g.key] for g in s.members]) for s in survivors])
        quota = self._quotas(adjusted, cfg.population_size - len(elites))

        new_pop = []
        for g in elites:
            e = g.copy()
            e.key = g.key
            new_pop.append(e)
        for sp, q in zip(survivors, quota):
            parents = sorted(sp.members, key=lambda g: (g.fitness, g.key))
            cut = max(int(math.ceil(cfg.survival_threshold * len(parents))), min(2, len(parents)))
            parents = parents[:cut]
            for _ in range(q):
                p1 = parents[int(rng.integers(len(parents)))]
                if len(parents) > 1 and rng.random() < cfg.crossover_prob:
                    p2 = parents[int(rng.integers(len(parents)))]
                    child = crossover(p1, p2, rng, cfg)
                else:
                    child = p1.copy()
                child = mutate_controller(child, self.registry, rng, cfg)
                new_pop.append(self._keyed(child))
        self.population = new_pop
        self.generation += 1
        return new_pop

    def _quotas(self, adjusted: np.ndarray, total: int) -> list[int]:
        # largest-remainder apportionment with a per-species floor
        share = adjusted / adjusted.sum() * total
        q = np.floor(share).astype(int)
        for k in np.argsort(-(share - q), kind="stable")[: total - q.sum()]:
            q[k] += 1
        return [max(self.config.min_species_size, int(v)) for v in q]
