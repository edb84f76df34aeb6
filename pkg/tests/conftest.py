import numpy as np
import pytest

from tsmr_qd.neuro import decode_and_eval
from tsmr_qd.physics import SimConfig, TaskSpec, aggregate
from tsmr_qd.physics.sim import EvaluationResult


def synthetic_evaluator(task: TaskSpec, sim: SimConfig | None = None, never_worse: bool = False):
    """Cheap deterministic stand-in for the simulator.

    The head moves in a straight line whose velocity depends on the network
    outputs and the morphology, so fitness and sensory data vary smoothly
    with both genomes.  With ``never_worse`` final distances are capped at
    the initial distance, so every f_s is non-negative.
    """
    sim = sim or SimConfig()
    nt, ns = task.n_targets, sim.n_samples
    t = np.linspace(1.0 / ns, 1.0, ns)
    targets = np.array([task.target_xy(k) for k in range(nt)])

    def fn(m, c):
        out = decode_and_eval(c, np.linspace(-1.0, 1.0, c.input_count))
        v = (out[: 2 * nt].reshape(nt, 2) - 0.5) * 0.6
        v = v + 0.01 * m.num_modules - 0.004 * m.stiffness_level
        traj = t[None, :, None] * v[:, None, :]
        d = np.hypot(*(traj[:, -1] - targets).T)
        if never_worse:
            d = np.minimum(d, task.initial_distance)
        dist = np.repeat(d[:, None], len(task.noise_seeds), axis=1)
        flags = np.zeros_like(dist, dtype=bool)
        return EvaluationResult(aggregate(d), d, dist, traj, flags, flags.copy())

    return fn


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def goal_task():
    return TaskSpec.goal()


@pytest.fixture(scope="session")
def squeeze_task():
    return TaskSpec.squeeze()
