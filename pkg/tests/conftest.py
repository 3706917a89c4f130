import numpy as np
import pytest

from resin.gp import TrajectoryGaussian


def random_spd2(rng, lo=0.3, hi=3.0):
    """Random well-conditioned SPD 2x2 matrix."""
    theta = rng.uniform(0, 2 * np.pi)
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    lam = rng.uniform(lo, hi, size=2)
    return R @ np.diag(lam) @ R.T


def random_trajectory_gaussian(rng, horizon=5, mean_scale=1.0,
                               lo=0.3, hi=3.0, start_step=0):
    mean = rng.normal(0.0, mean_scale, size=2 * horizon)
    blocks = np.stack([random_spd2(rng, lo, hi) for _ in range(horizon)])
    return TrajectoryGaussian(start_step, mean, blocks)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
