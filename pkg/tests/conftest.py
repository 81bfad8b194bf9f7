"""Shared test helpers: random discrete models and small scenario builders."""

import numpy as np
import pytest

from palmtrack.oracle import DiscreteModel, suggest_n_max


def random_discrete_model(rng, n_states=None, n_measurements=None,
                          max_detect=0.95, mass_range=(0.2, 1.2)):
    """A random, well-conditioned discrete model for oracle comparisons."""
    s = int(n_states if n_states is not None else rng.integers(2, 7))
    k = int(n_measurements if n_measurements is not None else rng.integers(1, 4))
    intensity = rng.uniform(0.05, 1.0, s)
    intensity *= rng.uniform(*mass_range) / intensity.sum()
    detect = rng.uniform(0.05, max_detect, s)
    likelihood = rng.uniform(0.02, 2.0, (s, k))
    clutter = rng.uniform(0.1, 1.5, k)
    return DiscreteModel(prior_intensity=intensity, detect_prob=detect,
                         likelihood=likelihood, clutter=clutter,
                         cell_volume=float(rng.uniform(0.5, 1.5)))


def enumerated(model, tail_tol=1e-12):
    from palmtrack.oracle import enumerate_posterior
    return enumerate_posterior(model, suggest_n_max(model, tail_tol))


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)
