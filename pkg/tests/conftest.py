import numpy as np
import pytest

from fedzo import FeasibleSet, make_problem


@pytest.fixture
def ball3() -> FeasibleSet:
    return FeasibleSet.euclidean_ball(np.zeros(3), 1.0)


def standard_problems(d: int, sigma: float = 0.1):
    """One instance of each objective family at dimension d."""
    a = np.linspace(1.0, 2.0, d)
    theta = np.full(d, -0.3)
    slopes = np.stack([np.eye(d)[i % d] for i in range(3)])
    offsets = np.array([0.0, 0.1, -0.2])
    return [
        make_problem("linear-noise", d, a=a, noise_scale=sigma),
        make_problem("shifted-norm", d, theta=theta, noise_scale=sigma),
        make_problem("max-affine-noise", d, slopes=slopes, offsets=offsets,
                     noise_scale=sigma),
    ]
