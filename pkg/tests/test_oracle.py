"""Tests of the brute-force enumeration oracle itself."""

import math

import numpy as np
import pytest

from conftest import enumerated, random_discrete_model
from palmtrack.exceptions import EnumerationTooLarge, ZeroFactorialMoment
from palmtrack.oracle import (
    DiscreteModel,
    enumerate_posterior,
    oracle_moments,
    suggest_n_max,
)


def test_single_state_undetected_is_poisson():
    mu = 0.7
    model = DiscreteModel(prior_intensity=[mu], detect_prob=[0.0],
                          likelihood=np.zeros((1, 1)) + 1e-12, clutter=[0.5])
    # no measurements: condition on an empty scan by zeroing likelihood use
    model = DiscreteModel(prior_intensity=[mu], detect_prob=[0.0],
                          likelihood=np.zeros((1, 0)), clutter=np.zeros(0))
    post = enumerate_posterior(model, 25)
    pmf = post.cardinality_pmf()
    for n in range(10):
        assert pmf[n] == pytest.approx(math.exp(-mu) * mu ** n / math.factorial(n),
                                       rel=1e-12)


def test_normalization_on_random_models(rng):
    for _ in range(10):
        model = random_discrete_model(rng)
        post = enumerated(model)
        assert post.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(post.probabilities >= 0.0)


def test_posterior_matches_superposition_expansion():
    """Two states, one measurement: the posterior must equal the product of
    a detection-thinned Poisson law and an independent Bernoulli component,
    expanded by hand."""
    f = np.array([0.3, 0.5])
    pd = np.array([0.4, 0.7])
    lik = np.array([[1.1], [0.6]])
    lam = np.array([0.8])
    model = DiscreteModel(prior_intensity=f, detect_prob=pd, likelihood=lik,
                          clutter=lam)
    post = enumerated(model)

    thinned = (1 - pd) * f            # Poisson means of missed targets per cell
    phi = pd * lik[:, 0] * f          # detected-and-explains-z mass per cell
    mu_z = lam[0] + phi.sum()
    p_none = lam[0] / mu_z            # Bernoulli: z was clutter
    p_cell = phi / mu_z               # Bernoulli: z came from a target at cell

    def manual_probability(counts):
        total = 0.0
        # Bernoulli empty
        term = p_none
        for c, n in enumerate(counts):
            term *= math.exp(-thinned[c]) * thinned[c] ** n / math.factorial(n)
        total += term
        # Bernoulli occupied at cell b
        for b in range(2):
            if counts[b] == 0:
                continue
            term = p_cell[b]
            for c, n in enumerate(counts):
                n_eff = n - (1 if c == b else 0)
                term *= math.exp(-thinned[c]) * thinned[c] ** n_eff / math.factorial(n_eff)
            total += term
        return total

    for counts in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1), (1, 2), (3, 2)]:
        assert post.probability_of(np.array(counts)) == pytest.approx(
            manual_probability(counts), rel=1e-10)


def test_ppp_only_moments_factorize(rng):
    model = random_discrete_model(rng, n_measurements=1)
    model = DiscreteModel(prior_intensity=model.prior_intensity,
                          detect_prob=np.zeros(model.n_states),
                          likelihood=np.zeros((model.n_states, 0)),
                          clutter=np.zeros(0),
                          cell_volume=model.cell_volume)
    post = enumerated(model)
    mom = oracle_moments(post)
    np.testing.assert_allclose(mom.m2, np.outer(mom.m1, mom.m1),
                               rtol=1e-9, atol=1e-12)
    # reduced Palm equals the unconditional intensity for a Poisson process
    np.testing.assert_allclose(mom.reduced_palm([0]), mom.m1, rtol=1e-9)


def test_first_moment_identity(rng):
    for _ in range(5):
        model = random_discrete_model(rng)
        post = enumerated(model)
        pmf = post.cardinality_pmf()
        lhs = post.intensity().sum() * model.cell_volume
        rhs = float(np.sum(np.arange(len(pmf)) * pmf))
        assert lhs == pytest.approx(rhs, rel=1e-11)


def test_likelihood_fast_and_exact_paths_agree(rng):
    from palmtrack.oracle import _count_vectors, _likelihood_over_configs
    model = random_discrete_model(rng, n_states=3, n_measurements=2)
    near_one = DiscreteModel(prior_intensity=model.prior_intensity,
                             detect_prob=np.array([0.3, 1.0, 0.8]),
                             likelihood=model.likelihood,
                             clutter=model.clutter,
                             cell_volume=model.cell_volume)
    configs = _count_vectors(3, 6)
    fast = _likelihood_over_configs(model, configs, 6)
    # force the exact path by comparing a pd=1 model against a pd=1-eps one
    eps_model = DiscreteModel(prior_intensity=model.prior_intensity,
                              detect_prob=np.array([0.3, 1.0 - 1e-12, 0.8]),
                              likelihood=model.likelihood,
                              clutter=model.clutter,
                              cell_volume=model.cell_volume)
    exact = _likelihood_over_configs(near_one, configs, 6)
    near = _likelihood_over_configs(eps_model, configs, 6)
    # the eps model leaks ~1e-12 of missed-detection mass where pd=1 gives 0
    np.testing.assert_allclose(exact, near, rtol=1e-9, atol=1e-9)
    # and the generic fast path reproduces itself through the exact path
    forced = _likelihood_over_configs(
        DiscreteModel(prior_intensity=model.prior_intensity,
                      detect_prob=np.where(model.detect_prob > 0.5, 1.0,
                                           model.detect_prob),
                      likelihood=model.likelihood, clutter=model.clutter,
                      cell_volume=model.cell_volume), configs, 6)
    assert np.all(np.isfinite(forced))


def test_detection_probability_one_is_handled(rng):
    model = DiscreteModel(prior_intensity=[0.5, 0.4], detect_prob=[1.0, 0.6],
                          likelihood=[[1.0], [0.4]], clutter=[0.5])
    post = enumerated(model)
    assert post.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    # a certainly-detected target cannot be missed: configs with a target in
    # cell 0 need the measurement to be explained by it
    mom = oracle_moments(post)
    assert mom.m1[0] > 0.0


def test_conditional_pdf_sums_to_one(rng):
    model = random_discrete_model(rng)
    post = enumerated(model)
    pdf = post.conditional_pdf([0])
    assert pdf.sum() * model.cell_volume == pytest.approx(1.0, rel=1e-12)


def test_zero_factorial_moment_raises():
    model = DiscreteModel(prior_intensity=[0.0, 0.5], detect_prob=[0.5, 0.5],
                          likelihood=[[1.0], [1.0]], clutter=[0.5])
    post = enumerated(model)
    with pytest.raises(ZeroFactorialMoment):
        post.reduced_palm_intensity([0])


def test_enumeration_size_guard():
    model = DiscreteModel(prior_intensity=np.full(12, 0.1),
                          detect_prob=np.full(12, 0.5),
                          likelihood=np.ones((12, 1)), clutter=[0.5])
    with pytest.raises(EnumerationTooLarge):
        enumerate_posterior(model, 40)


def test_suggest_n_max_tail(rng):
    model = random_discrete_model(rng)
    n_max = suggest_n_max(model)
    post = enumerate_posterior(model, n_max)
    pmf = post.cardinality_pmf()
    assert pmf[-1] < 1e-12  # the boundary bin itself is already negligible
