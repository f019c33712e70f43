import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def rand_pd(p, rng, jitter=0.5):
    a = rng.standard_normal((p, p))
    return a @ a.T + jitter * np.eye(p)


def rand_full_rank(p, rng):
    a = rng.standard_normal((p, p))
    while abs(np.linalg.det(a)) < 1e-3:
        a = rng.standard_normal((p, p))
    return a
