# %% [markdown]
# # A tensegrity robot in the simulator
#
# A robot is a chain of icosahedral tensegrity modules. Its genome lists the
# number of modules, a cable stiffness level shared by all modules, and the
# face through which each module connects to the next one. Here we build one
# robot, drive it with a small NEAT controller, and look at where its head
# goes.

# %%
from pathlib import Path

import numpy as np

from tsmr_qd.morphology import MorphologyGenome, build_chain
from tsmr_qd.neuro import minimal_genome
from tsmr_qd.physics import SimConfig, TaskSpec, evaluate, settled_chain, simulate, write_trajectory_csv

OUT = Path(__file__).resolve().parent / "_out"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(0)

# %% [markdown]
# Three modules at stiffness level 4. Each module has 12 nodes, 6 rigid rods
# and 24 tension-only cables.

# %%
robot = MorphologyGenome(num_modules=3, stiffness_level=4, connection_faces=(7, 7))
chain = build_chain(robot)
print("archive cell:", robot.descriptor)
print("nodes", len(chain.positions), "rods", len(chain.rods), "cables", len(chain.cables),
      "links", len(chain.links))
print(f"chain length {chain.chain_length:.3f} m, cable stiffness {robot.stiffness:.0f} N/m")

# %% [markdown]
# Before an episode starts, the robot settles under gravity. The resting pose
# is then re-framed so the head sits at the origin and faces +x.

# %%
cfg = SimConfig()
_, pose = settled_chain(robot.to_record(), cfg)
print("head centroid after settling:", pose[:12, :2].mean(axis=0).round(6))

# %% [markdown]
# ## One episode
#
# The goal-reaching task has four targets 45 cm away. A controller with two
# inputs (distance and bearing to the target) sets the amplitude and phase
# of each module's sinusoidal actuation.

# %%
goal = TaskSpec.goal()
controller = minimal_genome(goal.n_inputs, 20, rng)
episode = simulate(robot, controller, goal, target_index=0, noise_seed=0)
print(f"final distance to target 0: {episode.distance:.3f} m (started at {goal.initial_distance} m)")
print("head samples (one per second), first five:\n", episode.trajectory[:5].round(4))
print("smallest cable force over the episode:", episode.min_cable_force, "(never compressive)")

# %% [markdown]
# With actuation switched off the robot stays where it is.

# %%
still = simulate(robot, controller, goal, 0, 0, amplitude=0.0)
drift = np.hypot(*(still.final_positions[:12, :2].mean(axis=0) - pose[:12, :2].mean(axis=0)))
print(f"head drift without actuation over {cfg.duration:.0f} s: {drift * 1e6:.2f} micrometres")

# %% [markdown]
# ## Full evaluation
#
# An individual is scored on every target with two noise seeds. The distances
# are averaged over seeds per target. They are then combined into one number
# that adds half the gap between the worst target and the mean, so lower is
# better. The seed-averaged head trajectories become the sensory data used by
# the automatic descriptors.

# %%
result = evaluate(robot, controller, goal)
print("mean distance per target:", result.mean_distances.round(3))
print(f"fitness {result.fitness:.4f} m, i.e. {(goal.initial_distance - result.fitness) * 100:.2f} cm closed")
print("sensory vector length:", result.sensory_data.shape[0])
write_trajectory_csv(OUT / "trajectories.csv", result.seed_trajectories, cfg.sample_period, goal.noise_seeds)

# %% [markdown]
# ## Plot

# %%
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

fig, ax = plt.subplots(figsize=(5, 5))
for t in range(goal.n_targets):
    xy = np.vstack([[0.0, 0.0], result.trajectories[t]])  # episodes start with the head at the origin
    line, = ax.plot(xy[:, 0], xy[:, 1], label=f"target {t}")
    ax.plot(*goal.target_xy(t), "x", color=line.get_color())
ax.set_aspect("equal")
ax.set_xlabel("x (m)")
ax.set_ylabel("y (m)")
ax.legend()
fig.savefig(OUT / "trajectories.png", dpi=120)
print("wrote", OUT / "trajectories.png")
