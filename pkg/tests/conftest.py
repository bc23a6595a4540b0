import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("ci", deadline=None, derandomize=True)
hypothesis.settings.load_profile("ci")


def random_spd(rng, p, cond=None):
    """Well-conditioned random SPD matrix of dimension p."""
    g = rng.standard_normal((p, p + 2))
    m = g @ g.T / (p + 2)
    return m + 0.2 * np.eye(p)


def random_m_matrix(rng, p):
    """Random SPD M-matrix via a weighted Laplacian plus a positive shift."""
    mask = np.triu(rng.random((p, p)) < 0.5, k=1)
    w = np.where(mask, rng.uniform(0.2, 2.0, (p, p)), 0.0)
    w = w + w.T
    lap = np.diag(w.sum(axis=1)) - w
    return lap + rng.uniform(0.3, 1.5) * np.eye(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
