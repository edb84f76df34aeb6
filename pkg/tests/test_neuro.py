import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import GROW, grown_genome, relaxation
from tsmr_qd.neuro import (ConnectionGene, ControllerGenome, InnovationRegistry, NeatConfig, NeatPopulation,
                           NodeGene, StructuralError, compatibility, crossover, decode_and_eval, is_acyclic,
                           minimal_genome, mutate_controller)



@pytest.mark.parametrize("n_in,nodes,conns", [(2, 22, 40), (5, 25, 100)])
def test_minimal_genome_shape(n_in, nodes, conns):
    g = minimal_genome(n_in, 20, np.random.default_rng(0))
    assert len(g.nodes) == nodes and len(g.connections) == conns
    assert is_acyclic(g)
    assert not any(n.kind == "hidden" for n in g.nodes.values())


def test_zero_network_outputs_half():
    g = minimal_genome(2, 20, np.random.default_rng(0))
    for c in g.connections.values():
        c.weight = 0.0
    for n in g.nodes.values():
        n.bias = 0.0
    assert np.array_equal(decode_and_eval(g, [0.3, -2.0]), np.full(20, 0.5))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_single_path_closed_form(w, x):
    g = ControllerGenome(1, 1, {0: NodeGene(0, "input"), 1: NodeGene(1, "output", 0.0)},
                         {0: ConnectionGene(0, 0, 1, w)})
    assert decode_and_eval(g, [x])[0] == pytest.approx(1.0 / (1.0 + math.exp(-w * x)), abs=1e-15)


def test_decode_matches_relaxation():
    rng = np.random.default_rng(3)
    reg = InnovationRegistry(2)
    reg5 = InnovationRegistry(5)
    for k in range(1000):
        g = grown_genome(rng, reg) if k % 2 else grown_genome(rng, reg5, 5)
        x = rng.normal(size=g.input_count) * 2
        assert np.max(np.abs(decode_and_eval(g, x) - relaxation(g, x))) <= 1e-9


def test_decode_rejects_wrong_input_count():
    with pytest.raises(ValueError):
        decode_and_eval(minimal_genome(2, 20, np.random.default_rng(0)), [1.0])


def test_decode_rejects_cycle():
    g = ControllerGenome(1, 1, {0: NodeGene(0, "input"), 1: NodeGene(1, "output"), 2: NodeGene(2, "hidden")},
                         {0: ConnectionGene(0, 0, 2, 1.0), 1: ConnectionGene(1, 2, 1, 1.0),
                          2: ConnectionGene(2, 1, 2, 1.0)})
    assert not is_acyclic(g)
    with pytest.raises(StructuralError):
        decode_and_eval(g, [1.0])


def test_add_node_convention():
    rng = np.random.default_rng(0)
    reg = InnovationRegistry(2)
    g = minimal_genome(2, 20, rng, reg)
    only_nodes = NeatConfig(weight_mutate_prob=0, bias_mutate_prob=0, add_connection_prob=0, add_node_prob=1.0,
                            toggle_enable_prob=0)
    child = mutate_controller(g, reg, rng, only_nodes)
    (hidden,) = [n for n in child.nodes if n not in g.nodes]
    (old,) = [c for c in child.connections.values() if not c.enabled]
    into = [c for c in child.connections.values() if c.dst == hidden]
    out = [c for c in child.connections.values() if c.src == hidden]
    assert len(into) == 1 and len(out) == 1
    assert into[0].src == old.src and into[0].weight == 1.0
    assert out[0].dst == old.dst and out[0].weight == g.connections[old.innovation].weight


def test_same_edge_same_innovation_within_generation():
    reg = InnovationRegistry(2)
    reg.new_generation()
    a = reg.connection(22, 5)
    b = reg.connection(22, 5)
    assert a == b
    assert reg.split(3) == reg.split(3)
    # the minimal topology keeps fixed numbers across generations
    first = reg.connection(1, 7)
    reg.new_generation()
    assert reg.connection(1, 7) == first == 1 * 20 + 5


def test_innovations_consistent_across_genomes_in_generation():
    rng = np.random.default_rng(4)
    reg = InnovationRegistry(2)
    pop = [minimal_genome(2, 20, rng, reg) for _ in range(30)]
    for _ in range(10):
        reg.new_generation()
        pop = [mutate_controller(g, reg, rng, GROW) for g in pop]
        seen: dict[int, tuple[int, int]] = {}
        for g in pop:
            for inn, c in g.connections.items():
                assert seen.setdefault(inn, (c.src, c.dst)) == (c.src, c.dst)


def test_mutation_and_crossover_stay_acyclic():
    rng = np.random.default_rng(5)
    reg = InnovationRegistry(2)
    pop = [minimal_genome(2, 20, rng, reg) for _ in range(20)]
    ops = 0
    while ops < 20_000:
        reg.new_generation()
        nxt = []
        for g in pop:
            g = mutate_controller(g, reg, rng, GROW)
            ops += 1
            other = pop[int(rng.integers(len(pop)))]
            g.fitness, other.fitness = float(rng.random()), float(rng.random())
            child = crossover(g, other, rng)
            ops += 1
            assert is_acyclic(g) and is_acyclic(child)
            nxt.append(child)
        pop = nxt
        # restart once networks grow large so the run stays quick
        if max(len(g.connections) for g in pop) > 120:
            pop = [minimal_genome(2, 20, rng, reg) for _ in range(20)]


def test_crossover_identical_parents():
    rng = np.random.default_rng(6)
    g = grown_genome(rng, InnovationRegistry(2))
    g.fitness = 0.3
    h = g.copy()
    h.fitness = 0.3
    child = crossover(g, h, rng)
    assert sorted(child.nodes) == sorted(g.nodes)
    assert sorted(child.connections) == sorted(g.connections)
    assert all(child.connections[i].weight == g.connections[i].weight for i in g.connections)


def test_crossover_keeps_fitter_parents_node():
    rng = np.random.default_rng(7)
    reg = InnovationRegistry(2)
    base = minimal_genome(2, 20, rng, reg)
    rich = mutate_controller(base, reg, rng, NeatConfig(add_node_prob=1.0, add_connection_prob=0.0))
    extra = set(rich.nodes) - set(base.nodes)
    assert extra
    rich.fitness, base.fitness = 0.1, 0.5
    for order in ((rich, base), (base, rich)):
        child = crossover(*order, rng)
        assert extra <= set(child.nodes)


def test_crossover_acyclic_random_pairs():
    rng = np.random.default_rng(8)
    reg = InnovationRegistry(2)
    pool = [grown_genome(rng, reg, steps=8) for _ in range(60)]
    for _ in range(10_000):
        a, b = pool[int(rng.integers(60))], pool[int(rng.integers(60))]
        a.fitness, b.fitness = float(rng.random()), float(rng.random())
        assert is_acyclic(crossover(a, b, rng))


def test_compatibility_properties():
    rng = np.random.default_rng(9)
    reg = InnovationRegistry(2)
    a, b = grown_genome(rng, reg), grown_genome(rng, reg)
    assert compatibility(a, a) == 0.0
    assert compatibility(a, b) == compatibility(b, a)


@given(st.floats(0.0, 10.0))
def test_compatibility_weight_term(delta):
    a = minimal_genome(2, 20, np.random.default_rng(0))
    b = a.copy()
    b.connections[7].weight += delta
    cfg = NeatConfig()
    # one matching gene differs: mean weight difference over the 40 matching genes
    expected = cfg.weight_coefficient * delta / 40
    assert compatibility(a, b, cfg) == pytest.approx(expected, rel=1e-9, abs=1e-15)


def test_identical_population_single_species():
    pop = NeatPopulation(2, np.random.default_rng(0))
    proto = pop.population[0]
    pop.population = [proto.copy() for _ in range(10)]
    for k, g in enumerate(pop.population):
        g.key = k
    pop.speciate()
    assert len(pop.species) == 1


def test_every_member_in_one_species():
    pop = NeatPopulation(2, np.random.default_rng(1))
    for _ in range(5):
        for g in pop.population:
            g.fitness = float(pop.rng.random())
        pop.reproduce()
    pop.speciate()
    keys = [g.key for s in pop.species for g in s.members]
    assert sorted(keys) == sorted(g.key for g in pop.population)


def test_elitism_keeps_generation_best():
    rng = np.random.default_rng(2)
    pop = NeatPopulation(2, rng)

    def score(g):  # deterministic evaluation
        return float(np.sum(decode_and_eval(g, [0.5, -0.5]) ** 2))

    best_prev = math.inf
    for _ in range(15):
        for g in pop.population:
            g.fitness = score(g)
        best = min(pop.population, key=lambda g: g.fitness)
        assert best.fitness <= best_prev
        best_prev = best.fitness
        snapshot = best.structure()
        pop.reproduce()
        assert any(g.structure() == snapshot and g.key == best.key for g in pop.population)


def _distinct_species_population(n_species=4, per=5):
    pop = NeatPopulation(2, np.random.default_rng(3), NeatConfig(population_size=n_species * per))
    rng = np.random.default_rng(4)
    genomes = []
    for s in range(n_species):
        proto = minimal_genome(2, 20, rng, pop.registry)
        for c in proto.connections.values():
            c.weight = 100.0 * s  # far apart in weight space
        for k in range(per):
            g = proto.copy()
            g.key = s * per + k
            genomes.append(g)
    pop.population = genomes
    pop._next_key = len(genomes)
    return pop


def test_species_elitism_with_all_stagnant():
    pop = _distinct_species_population()
    pop.speciate()
    assert len(pop.species) == 4
    pop.generation = 100
    for sp in pop.species:
        sp.best_ever = -math.inf  # never improves again
        sp.last_improved = 0
    # species s has fitness 0.1*(s+1): species 0 and 1 are the two best
    for g in pop.population:
        g.fitness = 0.1 * (g.key // 5 + 1) + 0.001 * (g.key % 5)
    ranked = sorted(pop.species, key=lambda s: s.best_fitness)
    pop.reproduce()
    removed = pop.events[-1]
    assert removed["event"] == "species_removed"
    assert sorted(removed["species"]) == sorted(s.key for s in ranked[2:])
    survivors = {g.key // 5 for g in pop.population if g.key < 20}
    assert survivors <= {0, 1}


def test_controller_record_round_trip():
    rng = np.random.default_rng(10)
    g = grown_genome(rng, InnovationRegistry(5), 5)
    h = ControllerGenome.from_record(g.to_record())
    assert h.structure() == g.structure()
