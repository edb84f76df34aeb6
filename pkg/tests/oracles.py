"""Brute-force reference implementations shared by the unit and acceptance tests."""
import itertools
import math

import numpy as np

from tsmr_qd.neuro import ControllerGenome, NeatConfig, minimal_genome, mutate_controller

GROW = NeatConfig(add_connection_prob=0.6, add_node_prob=0.4, toggle_enable_prob=0.2)


def grown_genome(rng, registry, n_inputs=2, steps=15) -> ControllerGenome:
    g = minimal_genome(n_inputs, 20, rng, registry)
    for _ in range(steps):
        registry.new_generation()
        g = mutate_controller(g, registry, rng, GROW)
    return g


def relaxation(g: ControllerGenome, x) -> np.ndarray:
    """Reference evaluation: update every node from the current values until nothing changes."""
    vals = {n: 0.0 for n in g.nodes}
    for i, v in zip(g.input_ids, x):
        vals[i] = float(v)
    enabled = [c for c in g.connections.values() if c.enabled]
    for _ in range(len(g.nodes) + 1):
        new = dict(vals)
        for nid, node in g.nodes.items():
            if nid in g.input_ids:
                continue
            s = node.bias + sum(c.weight * vals[c.src] for c in enabled if c.dst == nid)
            new[nid] = 1.0 / (1.0 + math.exp(-s))
        if new == vals:
            break
        vals = new
    return np.array([vals[o] for o in g.output_ids])


def brute_force_p(x, y):
    """Two-sided rank-sum p-value by enumerating every split of the pooled ranks."""
    pooled = np.concatenate([x, y])
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i: j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n = len(x)
    mean = n * (len(pooled) + 1) / 2.0
    w = ranks[:n].sum()
    sums = [ranks[list(c)].sum() for c in itertools.combinations(range(len(pooled)), n)]
    return sum(abs(s - mean) >= abs(w - mean) - 1e-9 for s in sums) / len(sums)
