# %% [markdown]
# # Archives and automatic feature descriptors
#
# A MAP-Elites archive keeps the best solution per grid cell. Fitness is a
# distance, so lower is better. The morphology archive is indexed by
# hand-defined features: stiffness level and number of modules. Controllers
# get their descriptors automatically. Trajectories are standardized and
# projected onto their first two principal components, and each component is
# cut into equal-width bins.
#
# This demo uses synthetic trajectories so it runs instantly.

# %%
import numpy as np

from tsmr_qd.autofd import AutoMap, FeatureProjector
from tsmr_qd.morphology import random_morphology
from tsmr_qd.neuro import minimal_genome
from tsmr_qd.qd import Archive, Solution, fitness_heatmap, random_selection

rng = np.random.default_rng(1)
D0 = 0.45  # starting distance to the targets (m)

# %% [markdown]
# ## Insertion rules

# %%
a = Archive((9, 10), "morphology")
ctrl = minimal_genome(2, 20, rng)
for f in (0.30, 0.20, 0.25):
    print(f"insert fitness {f:.2f} into (1, 1):", a.add(Solution(random_morphology(rng), ctrl, f), (1, 1)))
print("stored:", a[(1, 1)].fitness)

# %% [markdown]
# QD score sums the distance closed (in cm) over occupied cells. It is
# negative for robots that end up farther away than they started.

# %%
for k in range(40):
    m = random_morphology(rng)
    a.add(Solution(m, ctrl, float(rng.uniform(0.2, 0.5))), m.descriptor)
print(f"occupied {len(a)} / 90, coverage {a.coverage():.2f}, QD score {a.qd_score(D0):.1f} cm")
with np.printoptions(precision=0, suppress=True, nanstr=" .", linewidth=120):
    print(fitness_heatmap(a, D0))

# %% [markdown]
# ## Automatic descriptors
#
# Four targets x 40 samples x (x, y) gives 320 numbers per controller. We fake
# them as straight walks with random velocity.

# %%
def fake_solution(k):
    v = rng.normal(0, 0.01, size=(4, 1, 2))
    traj = np.arange(1, 41)[None, :, None] * v
    return Solution(random_morphology(rng), ctrl, float(rng.uniform(0.1, 0.5)), traj, id=k)


batch = [fake_solution(k) for k in range(60)]
proj = FeatureProjector((9, 10)).fit(np.stack([s.sensory_data for s in batch]))
print("explained variance of the two axes:", proj.pca.explained_variance.round(3))
print("first five cells:", [proj.cell(s.sensory_data) for s in batch[:5]])

# %% [markdown]
# `AutoMap` wraps an archive with a projector. It refits the projection at
# scheduled generations. When new data falls outside the bins, it widens the
# bounds and re-inserts every occupant before inserting the batch. The trace
# records each of these steps.

# %%
auto = AutoMap(Archive((9, 10), "controller"), FeatureProjector((9, 10)), schedule=(0, 2))
for gen in range(4):
    scale = 1.0 if gen < 3 else 4.0  # the last batch walks much farther
    new = [fake_solution(100 * gen + k) for k in range(24)]
    for s in new:
        s.trajectories = s.trajectories * scale
    auto.add_batch(new, gen)
for t in auto.trace:
    print(t)

# %% [markdown]
# Dual-archive selection draws half the parents from each archive.

# %%
parents = random_selection([a, auto.archive], 24, rng)
print(sum(p in a.solutions() for p in parents), "parents from the morphology archive")
