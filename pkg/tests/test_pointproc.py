"""Unit tests for the posterior point-process calculus."""

import math

import numpy as np
import pytest

from conftest import enumerated, random_discrete_model
from palmtrack import oracle, pointproc
from palmtrack.exceptions import (
    ConditioningOnZeroIntensity,
    EmptyPrior,
    TruncationInsufficient,
    ZeroClutterAtMeasurement,
    ZeroIntensityPoint,
    ZeroMassOnSupport,
    ZeroMeanPmf,
)
from palmtrack.oracle import DiscreteModel
from palmtrack.pointproc import (
    CanonicalPmf,
    CardinalityStrategy,
    EvalMode,
    PalmMethod,
    build_context,
    c1,
    c2,
    c3,
    canonical_estimate,
    canonical_pmf,
    conditional_track_pdf,
    iid_cluster_ratio,
    pair_correlation,
    palm_modulation,
    reduced_palm_intensity,
    round_half_away,
)


def simple_model(detect=0.9, k=1):
    intensity = np.array([0.3, 0.5, 0.2])
    likelihood = np.array([[1.2, 0.4], [0.3, 0.9], [0.8, 0.2]])[:, :k]
    return DiscreteModel(prior_intensity=intensity,
                         detect_prob=np.full(3, detect),
                         likelihood=likelihood,
                         clutter=np.full(k, 0.5))


class TestBuildContext:
    def test_no_detection_no_measurements(self):
        model = DiscreteModel(prior_intensity=[0.4, 0.6], detect_prob=[0.0, 0.0],
                              likelihood=np.zeros((2, 0)), clutter=np.zeros(0))
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: 0.0, lambda z, s: 0.0, lambda z: 1.0,
                            [], model.quadrature)
        assert ctx.mu_missed == pytest.approx(1.0)
        assert ctx.k == 0

    def test_constant_detection_missed_mass(self):
        model = simple_model(detect=0.9, k=1)
        ctx = model.context()
        assert ctx.mu_missed == pytest.approx(0.1 * model.total_prior_mass)

    def test_mu_z_matches_exhaustive_sum(self):
        model = simple_model()
        ctx = model.context()
        by_hand = 0.5 + sum(0.9 * model.likelihood[s, 0] * model.prior_intensity[s]
                            for s in range(3)) * model.cell_volume
        assert ctx.mu_z[0] == pytest.approx(by_hand, rel=1e-12)

    def test_zero_clutter_rejected(self):
        model = simple_model()
        with pytest.raises(ZeroClutterAtMeasurement):
            build_context(lambda s: model.prior_intensity[s],
                          lambda s: 0.9,
                          lambda z, s: model.likelihood[s, z],
                          lambda z: 0.0, [0], model.quadrature)

    def test_empty_prior_rejected(self):
        model = simple_model()
        with pytest.raises(EmptyPrior):
            build_context(lambda s: 0.0, lambda s: 0.9,
                          lambda z, s: model.likelihood[s, z],
                          lambda z: 0.5, [0], model.quadrature)

    def test_context_is_immutable(self):
        ctx = simple_model().context()
        with pytest.raises(AttributeError):
            ctx.mu_missed = 0.0


class TestIntensityKernels:
    def test_c1_no_measurements(self):
        model = simple_model(k=1)
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: 0.7, lambda z, s: 0.0, lambda z: 0.5,
                            [], model.quadrature)
        for s, mode in ((0, EvalMode.AT_ONE), (1, EvalMode.AT_ZERO)):
            assert c1(ctx, s, mode) == pytest.approx(0.3 * model.prior_intensity[s])

    def test_c2_zero_without_measurements(self):
        model = simple_model()
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: 0.7, lambda z, s: 0.0, lambda z: 0.5,
                            [], model.quadrature)
        assert c2(ctx, 0, 1) == 0.0

    def test_c2_zero_when_undetectable(self):
        intensity = np.array([0.3, 0.5])
        model = DiscreteModel(prior_intensity=intensity, detect_prob=[0.0, 0.8],
                              likelihood=[[1.0], [0.5]], clutter=[0.4])
        ctx = model.context()
        assert c2(ctx, 0, 1) == 0.0
        assert c2(ctx, 1, 1) < 0.0

    def test_c3_trivial_zeros(self):
        model = DiscreteModel(prior_intensity=[0.3, 0.5], detect_prob=[0.0, 0.8],
                              likelihood=[[1.0], [0.5]], clutter=[0.4])
        ctx = model.context()
        assert c3(ctx, 0, 1, 1) == 0.0
        assert c3(ctx, 1, 1, 1) > 0.0

    def test_single_target_posterior_mass_two_minus_pd(self):
        # unit-mass prior, one detection, vanishing clutter
        model = DiscreteModel(prior_intensity=[1.0], detect_prob=[0.9],
                              likelihood=[[2.0]], clutter=[1e-12])
        ctx = model.context()
        total = model.quadrature(lambda s: c1(ctx, s))
        assert total == pytest.approx(2.0 - 0.9, rel=1e-9)

    def test_modes_differ_by_denominator_swap(self, rng):
        model = random_discrete_model(rng)
        ctx = model.context()
        for s in range(model.n_states):
            phi = ctx.detection_terms(s)
            missed = (1 - model.detect_prob[s]) * model.prior_intensity[s]
            assert c1(ctx, s, EvalMode.AT_ONE) == pytest.approx(
                missed + np.sum(phi / ctx.mu_z), rel=1e-12)
            assert c1(ctx, s, EvalMode.AT_ZERO) == pytest.approx(
                missed + np.sum(phi / ctx.lambda_z), rel=1e-12)


class TestPairCorrelation:
    def test_ppp_posterior_is_uncorrelated(self):
        model = simple_model()
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: 0.7, lambda z, s: 0.0, lambda z: 0.5,
                            [], model.quadrature)
        assert pair_correlation(ctx, 0, 1) == 1.0

    def test_separated_measurements_nearly_uncorrelated(self):
        # two sharply localized measurements: cross likelihoods vanish
        eps = 1e-12
        model = DiscreteModel(prior_intensity=[0.5, 0.5],
                              detect_prob=[0.9, 0.9],
                              likelihood=[[2.0, eps], [eps, 2.0]],
                              clutter=[0.3, 0.3])
        ctx = model.context()
        assert pair_correlation(ctx, 0, 1) == pytest.approx(1.0, abs=1e-6)

    def test_in_unit_interval_randomized(self, rng):
        for _ in range(25):
            model = random_discrete_model(rng)
            ctx = model.context()
            for _ in range(20):
                a, b = rng.integers(0, model.n_states, 2)
                rho = pair_correlation(ctx, int(a), int(b))
                assert -1e-12 <= rho <= 1.0 + 1e-12

    def test_zero_intensity_point_raises(self):
        model = DiscreteModel(prior_intensity=[0.0, 1.0], detect_prob=[0.5, 0.5],
                              likelihood=[[1.0], [1.0]], clutter=[0.5])
        ctx = model.context()
        with pytest.raises(ZeroIntensityPoint):
            pair_correlation(ctx, 0, 1)


class TestReducedPalm:
    def test_empty_conditioning_is_posterior_intensity(self, rng):
        model = random_discrete_model(rng)
        ctx = model.context()
        for s in range(model.n_states):
            assert reduced_palm_intensity(ctx, s, []) == pytest.approx(c1(ctx, s))

    def test_undetectable_conditioning_changes_nothing(self):
        model = DiscreteModel(prior_intensity=[0.4, 0.6], detect_prob=[0.0, 0.8],
                              likelihood=[[1.0], [0.7]], clutter=[0.4])
        ctx = model.context()
        for method in (PalmMethod.EXACT_ONE, PalmMethod.FIRST_ORDER):
            for s in range(2):
                assert reduced_palm_intensity(ctx, s, [0], method) == pytest.approx(
                    c1(ctx, s), rel=1e-12)

    def test_first_order_matches_exact_pair_when_separated(self):
        eps = 1e-14
        model = DiscreteModel(prior_intensity=[0.5, 0.5, 0.2],
                              detect_prob=[0.9, 0.9, 0.9],
                              likelihood=[[2.0, eps], [eps, 2.0], [eps, eps]],
                              clutter=[0.3, 0.3])
        ctx = model.context()
        for x in range(3):
            exact = reduced_palm_intensity(ctx, x, [0, 1], PalmMethod.EXACT_PAIR)
            first = reduced_palm_intensity(ctx, x, [0, 1], PalmMethod.FIRST_ORDER)
            assert first == pytest.approx(exact, rel=1e-6)

    def test_first_order_gap_reported_when_overlapping(self):
        model = DiscreteModel(prior_intensity=[0.5, 0.5],
                              detect_prob=[0.9, 0.9],
                              likelihood=[[2.0, 1.9], [1.9, 2.0]],
                              clutter=[0.3, 0.3])
        ctx = model.context()
        exact = reduced_palm_intensity(ctx, 0, [0, 1], PalmMethod.EXACT_PAIR)
        first = reduced_palm_intensity(ctx, 0, [0, 1], PalmMethod.FIRST_ORDER)
        gap = abs(first - exact) / exact
        print(f"overlapping-region first-order relative gap: {gap:.3e}")
        assert gap > 0.0

    def test_first_order_below_unconditional(self, rng):
        for _ in range(10):
            model = random_discrete_model(rng)
            ctx = model.context()
            cond = [int(rng.integers(0, model.n_states))]
            for s in range(model.n_states):
                assert (reduced_palm_intensity(ctx, s, cond)
                        <= c1(ctx, s) + 1e-12)

    def test_ppp_invariance_without_measurements(self, rng):
        model = random_discrete_model(rng, n_measurements=1)
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: model.detect_prob[s],
                            lambda z, s: 0.0, lambda z: 0.5, [],
                            model.quadrature)
        for method, cond in ((PalmMethod.EXACT_ONE, [0]),
                             (PalmMethod.EXACT_PAIR, [0, 1]),
                             (PalmMethod.FIRST_ORDER, [0, 1])):
            for s in range(model.n_states):
                assert reduced_palm_intensity(ctx, s, cond, method) == pytest.approx(
                    c1(ctx, s), rel=1e-12)

    def test_cardinality_constraints(self):
        ctx = simple_model().context()
        with pytest.raises(ValueError):
            reduced_palm_intensity(ctx, 0, [0, 1], PalmMethod.EXACT_ONE)
        with pytest.raises(ValueError):
            reduced_palm_intensity(ctx, 0, [0], PalmMethod.EXACT_PAIR)

    def test_conditioning_on_zero_intensity_raises(self):
        model = DiscreteModel(prior_intensity=[0.0, 1.0], detect_prob=[0.5, 0.5],
                              likelihood=[[1.0], [1.0]], clutter=[0.5])
        ctx = model.context()
        with pytest.raises(ConditioningOnZeroIntensity):
            reduced_palm_intensity(ctx, 1, [0])


class TestPalmModulation:
    def test_empty_conditioning_all_ones(self):
        ctx = simple_model(k=2).context()
        mod = palm_modulation(ctx, [])
        assert np.all(mod.alpha == 1.0)

    def test_dominant_target_whitens_measurement(self):
        # one certain detection, vanishing clutter: near-total whitening,
        # alpha within clutter-to-normalizer ratio of zero
        lam = 1e-8
        model = DiscreteModel(prior_intensity=[1.0], detect_prob=[1.0],
                              likelihood=[[2.0]], clutter=[lam])
        ctx = model.context()
        mod = palm_modulation(ctx, [0])
        assert mod.alpha[0] == pytest.approx(lam / ctx.mu_z[0], abs=1e-6)
        assert abs(mod.alpha[0]) < 1e-7

    def test_alpha_never_exceeds_one(self, rng):
        for _ in range(10):
            model = random_discrete_model(rng)
            ctx = model.context()
            cond = rng.integers(0, model.n_states, 2).tolist()
            for mode in EvalMode:
                mod = palm_modulation(ctx, cond, mode)
                assert np.all(mod.alpha <= 1.0 + 1e-12)

    def test_alpha_recovers_oracle_reduction(self, rng):
        # the exact one-target reduction is linear in the per-measurement
        # components; solving that linear system with oracle intensities
        # must reproduce the closed-form coefficients
        model = random_discrete_model(rng, n_states=5, n_measurements=2)
        post = enumerated(model)
        ctx = model.context()
        cond = int(np.argmax(post.intensity()))
        reduced = post.reduced_palm_intensity([cond])
        missed = (1 - model.detect_prob) * model.prior_intensity
        bern = np.array([[model.detect_prob[s] * model.likelihood[s, j]
                          * model.prior_intensity[s] / ctx.mu_z[j]
                          for j in range(model.n_measurements)]
                         for s in range(model.n_states)])
        alpha_solved, *_ = np.linalg.lstsq(bern, reduced - missed, rcond=None)
        mod = palm_modulation(ctx, [cond])
        np.testing.assert_allclose(alpha_solved, mod.alpha, rtol=1e-8, atol=1e-10)

    def test_first_order_consistency_with_modulation(self, rng):
        # the first-order reduction equals missed + sum_j alpha_j * bernoulli_j
        model = random_discrete_model(rng)
        ctx = model.context()
        cond = [int(np.argmax([c1(ctx, s) for s in range(model.n_states)]))]
        mod = palm_modulation(ctx, cond)
        for x in range(model.n_states):
            phi = ctx.detection_terms(x)
            direct = ((1 - model.detect_prob[x]) * model.prior_intensity[x]
                      + float(np.sum(mod.alpha * phi / ctx.mu_z)))
            assert reduced_palm_intensity(ctx, x, cond) == pytest.approx(
                max(0.0, direct), rel=1e-10)


class TestCanonicalPmf:
    def test_poisson_when_no_measurements(self):
        model = simple_model()
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: 0.4, lambda z, s: 0.0, lambda z: 0.5,
                            [], model.quadrature)
        pmf = canonical_pmf(ctx)
        mu = ctx.mu_missed
        for n in range(6):
            expected = math.exp(-mu) * mu ** n / math.factorial(n)
            assert pmf.probabilities[n] == pytest.approx(expected, rel=1e-12)

    def test_two_measurement_expansion(self):
        # mu_missed = 0.5, detection odds r = (1, 2):
        # F(0) = exp(-0.5)/6, p0 = F(0), p1 = F(0) * (0.5 + 3)
        pmf = pointproc.canonical_pmf_from_mus(
            mu_missed=0.5, mu_z=np.array([2.0, 3.0]),
            lambda_z=np.array([1.0, 1.0]))
        f0 = math.exp(-0.5) / 6.0
        assert pmf.probabilities[0] == pytest.approx(f0, rel=1e-12)
        assert pmf.probabilities[1] == pytest.approx(f0 * 3.5, rel=1e-12)

    def test_sums_to_one_and_nonnegative(self, rng):
        for _ in range(20):
            model = random_discrete_model(rng)
            pmf = canonical_pmf(model.context())
            assert np.all(pmf.probabilities >= 0.0)
            assert pmf.tail_mass < 1e-9

    def test_insufficient_truncation_raises(self):
        model = simple_model()
        with pytest.raises(TruncationInsufficient):
            canonical_pmf(model.context(), n_max=1)


class TestCanonicalEstimate:
    def test_rounding_of_masses(self):
        def ctx_with_mass(mass):
            return pointproc.PhdPosteriorContext(
                prior_intensity=None, detect_prob=None, likelihood=None,
                clutter_intensity=None, measurements=(), mu_missed=mass,
                mu_z=np.zeros(0), lambda_z=np.zeros(0))
        strat = CardinalityStrategy.ROUNDED_EXPECTED
        assert canonical_estimate(ctx_with_mass(1.1), strat) == 1
        assert canonical_estimate(ctx_with_mass(0.1), strat) == 0
        assert canonical_estimate(ctx_with_mass(0.6), strat) == 1
        assert canonical_estimate(ctx_with_mass(0.5), strat) == 1  # half away

    def test_map_breaks_ties_low(self):
        pmf = CanonicalPmf(probabilities=[0.4, 0.4, 0.2], n_max=2)
        assert canonical_estimate(pmf, CardinalityStrategy.MAP_OF_PMF) == 0

    def test_map_of_context(self, rng):
        model = random_discrete_model(rng)
        ctx = model.context()
        pmf = canonical_pmf(ctx)
        assert (canonical_estimate(ctx, CardinalityStrategy.MAP_OF_PMF)
                == int(np.argmax(pmf.probabilities)))

    def test_round_half_away(self):
        assert round_half_away(0.5) == 1
        assert round_half_away(1.5) == 2
        assert round_half_away(1.49) == 1
        with pytest.raises(ValueError):
            round_half_away(-0.1)


class TestConditionalTrackPdf:
    def test_unconditioned_no_measurement_shape(self):
        model = DiscreteModel(prior_intensity=[0.4, 0.6], detect_prob=[0.25, 0.5],
                              likelihood=[[0.0], [0.0]], clutter=[0.5])
        ctx = build_context(lambda s: model.prior_intensity[s],
                            lambda s: model.detect_prob[s],
                            lambda z, s: 0.0, lambda z: 0.5, [],
                            model.quadrature)
        pdf = conditional_track_pdf(ctx, [], model.quadrature)
        raw = (1 - model.detect_prob) * model.prior_intensity
        expected = raw / (raw.sum() * model.cell_volume)
        for s in range(2):
            assert pdf(s) == pytest.approx(expected[s], rel=1e-12)

    def test_zero_mass_on_support_raises(self):
        model = DiscreteModel(prior_intensity=[1.0], detect_prob=[1.0],
                              likelihood=[[1.0]], clutter=[0.5])
        ctx = model.context()
        empty_support = lambda fn: 0.0
        with pytest.raises(ZeroMassOnSupport):
            conditional_track_pdf(ctx, [], empty_support)

    def test_integrates_to_one(self, rng):
        model = random_discrete_model(rng)
        ctx = model.context()
        pdf = conditional_track_pdf(ctx, [0], model.quadrature)
        assert model.quadrature(pdf) == pytest.approx(1.0, rel=1e-12)


class TestIidClusterRatio:
    def test_uniform_pmfs(self):
        # uniform count on {0..K}: ratio = 4(K-1)/(3K)
        for k_top, expected in ((4, 1.0), (3, 8.0 / 9.0), (5, 16.0 / 15.0)):
            pmf = np.full(k_top + 1, 1.0 / (k_top + 1))
            assert iid_cluster_ratio(pmf) == pytest.approx(expected, abs=1e-12)

    def test_poisson_is_one(self):
        n = np.arange(60, dtype=float)
        for mean in (0.5, 2.0, 7.0):
            pmf = np.exp(-mean + n * np.log(mean) -
                         np.cumsum(np.log(np.maximum(n, 1.0))))
            assert iid_cluster_ratio(pmf) == pytest.approx(1.0, abs=1e-12)

    def test_zero_mean_raises(self):
        with pytest.raises(ZeroMeanPmf):
            iid_cluster_ratio(np.array([1.0, 0.0]))
