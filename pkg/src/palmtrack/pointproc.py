"""Point-process calculus for the exact Bayes posterior of a PHD update.

A Poisson multi-target prior observed through independent detection and
Poisson clutter has a posterior that factors into a thinned Poisson process
(the missed targets) plus one Bernoulli process per measurement.  Everything
in this module works off that structure: posterior intensities, pair
correlations, reduced Palm (conditional) intensities, Palm modulation
coefficients, the posterior cardinality pmf, and per-target conditional pdfs.

All quantities come in two evaluation flavours:

* ``AT_ONE``  -- moment evaluations; measurement terms are divided by the
  full Bernoulli normalizer ``mu_z = lambda(z) + integral(P_D p(z|s) f(s))``.
* ``AT_ZERO`` -- fixed-cardinality pdf evaluations; the same expressions with
  every ``mu_z`` denominator replaced by the clutter intensity ``lambda(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np

from .exceptions import (
    ConditioningOnZeroIntensity,
    DegenerateDenominator,
    EmptyPrior,
    TruncationInsufficient,
    ZeroClutterAtMeasurement,
    ZeroIntensityPoint,
    ZeroMassOnSupport,
    ZeroMeanPmf,
)

StateEvaluator = Callable[[Any], float]
LikelihoodEvaluator = Callable[[Any, Any], float]
Quadrature = Callable[[StateEvaluator], float]


class EvalMode(Enum):
    """Denominator convention for posterior expressions."""

    AT_ONE = "at_one"
    AT_ZERO = "at_zero"


class PalmMethod(Enum):
    """How the reduced Palm intensity is evaluated."""

    EXACT_ONE = "exact_one"      # exact, single conditioning target
    EXACT_PAIR = "exact_pair"    # exact, conditioning target pair
    FIRST_ORDER = "first_order"  # sequential single-target corrections


class CardinalityStrategy(Enum):
    MAP_OF_PMF = "map"
    ROUNDED_EXPECTED = "rounded"


def round_half_away(x: float) -> int:
    """Round a nonnegative value to the nearest integer, halves away from zero."""
    if x < 0:
        raise ValueError(f"expected nonnegative argument, got {x}")
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PhdPosteriorContext:
    """One measurement update's worth of posterior structure.

    The evaluators describe the predicted target process and the sensor;
    ``mu_missed`` and ``mu_z`` are the integrals that normalize the thinned
    Poisson part and the per-measurement Bernoulli parts.  Contexts are
    immutable and safe to share across threads or processes.

    Evaluator-free contexts (``prior_intensity`` et al. set to ``None``) are
    legal for cardinality-only work, e.g. particle-filter posteriors whose
    integrals are weighted sums but which have no pointwise prior density.
    """

    prior_intensity: StateEvaluator | None
    detect_prob: StateEvaluator | None
    likelihood: LikelihoodEvaluator | None
    clutter_intensity: StateEvaluator | None
    measurements: tuple
    mu_missed: float
    mu_z: np.ndarray
    lambda_z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_z", np.asarray(self.mu_z, dtype=float))
        object.__setattr__(self, "lambda_z", np.asarray(self.lambda_z, dtype=float))
        if len(self.mu_z) != len(self.measurements):
            raise ValueError("mu_z and measurements must have equal length")
        if self.mu_missed < 0:
            raise ValueError("mu_missed must be nonnegative")
        if np.any(self.mu_z < self.lambda_z - 1e-12 * np.abs(self.lambda_z)):
            raise ValueError("mu_z must dominate the clutter intensity")

    @property
    def k(self) -> int:
        return len(self.measurements)

    @property
    def expected_count(self) -> float:
        """Total posterior mass: missed mass plus one Bernoulli mass per
        measurement."""
        if self.k == 0:
            return self.mu_missed
        return float(self.mu_missed + np.sum((self.mu_z - self.lambda_z) / self.mu_z))

    def denominators(self, mode: EvalMode) -> np.ndarray:
        return self.mu_z if mode is EvalMode.AT_ONE else self.lambda_z

    def detection_terms(self, x) -> np.ndarray:
        """P_D(x) * p(z_i|x) * f(x) for every measurement z_i."""
        self._require_evaluators()
        pd = self.detect_prob(x)
        if pd == 0.0 or self.k == 0:
            return np.zeros(self.k)
        fx = self.prior_intensity(x)
        if fx == 0.0:
            return np.zeros(self.k)
        return np.array([pd * self.likelihood(z, x) * fx for z in self.measurements])

    def _require_evaluators(self):
        if self.prior_intensity is None or self.detect_prob is None or self.likelihood is None:
            raise TypeError("context has no pointwise evaluators; built for "
                            "cardinality-only use")


def build_context(prior_intensity: StateEvaluator,
                  detect_prob: StateEvaluator,
                  likelihood: LikelihoodEvaluator,
                  clutter_intensity: StateEvaluator,
                  measurements: Sequence,
                  quadrature: Quadrature) -> PhdPosteriorContext:
    """Assemble a posterior context from model evaluators and a quadrature.

    ``quadrature`` integrates a scalar function of the state over the whole
    state space.  Gaussian-mixture and particle representations have
    closed-form/weighted-sum shortcuts elsewhere; this generic builder is for
    discrete grids and custom models.
    """
    measurements = tuple(measurements)
    lambda_z = np.array([float(clutter_intensity(z)) for z in measurements])
    for z, lam in zip(measurements, lambda_z):
        if lam <= 0.0:
            raise ZeroClutterAtMeasurement(
                f"clutter intensity is {lam} at measurement {z!r}")
    total_mass = quadrature(prior_intensity)
    if total_mass <= 0.0:
        raise EmptyPrior(f"prior intensity integrates to {total_mass}")
    mu_missed = quadrature(lambda s: (1.0 - detect_prob(s)) * prior_intensity(s))
    mu_z = np.array([
        lam + quadrature(lambda s: detect_prob(s) * likelihood(z, s) * prior_intensity(s))
        for z, lam in zip(measurements, lambda_z)
    ])
    return PhdPosteriorContext(
        prior_intensity=prior_intensity,
        detect_prob=detect_prob,
        likelihood=likelihood,
        clutter_intensity=clutter_intensity,
        measurements=measurements,
        mu_missed=float(mu_missed),
        mu_z=mu_z,
        lambda_z=lambda_z,
    )


def c1(ctx: PhdPosteriorContext, x, mode: EvalMode = EvalMode.AT_ONE) -> float:
    """Posterior intensity at ``x`` (the first-moment kernel).

    In ``AT_ONE`` mode this is the Bayes posterior intensity: the thinned
    prior plus one Bernoulli intensity per measurement.
    """
    ctx._require_evaluators()
    pd = ctx.detect_prob(x)
    fx = ctx.prior_intensity(x)
    value = (1.0 - pd) * fx
    if ctx.k and pd > 0.0 and fx > 0.0:
        phi = ctx.detection_terms(x)
        value += float(np.sum(phi / ctx.denominators(mode)))
    return value


def c2(ctx: PhdPosteriorContext, x1, x2, mode: EvalMode = EvalMode.AT_ONE) -> float:
    """Second-order interaction kernel; never positive.

    Subtracts the double counting where the same measurement would be
    claimed by targets at both ``x1`` and ``x2``.
    """
    if ctx.k == 0:
        return 0.0
    phi1 = ctx.detection_terms(x1)
    phi2 = ctx.detection_terms(x2)
    d = ctx.denominators(mode)
    return float(-np.sum(phi1 * phi2 / (d * d)))


def c3(ctx: PhdPosteriorContext, x1, x2, x3, mode: EvalMode = EvalMode.AT_ONE) -> float:
    """Third-order interaction kernel; never negative."""
    if ctx.k == 0:
        return 0.0
    phi1 = ctx.detection_terms(x1)
    phi2 = ctx.detection_terms(x2)
    phi3 = ctx.detection_terms(x3)
    d = ctx.denominators(mode)
    return float(np.sum(2.0 * phi1 * phi2 * phi3 / (d * d * d)))


def pair_correlation(ctx: PhdPosteriorContext, x1, x2) -> float:
    """Pair correlation of the Bayes posterior process; always in [0, 1]."""
    a = c1(ctx, x1)
    b = c1(ctx, x2)
    if a <= 0.0 or b <= 0.0:
        raise ZeroIntensityPoint("pair correlation needs positive intensity at "
                                 "both points")
    return 1.0 + c2(ctx, x1, x2) / (a * b)


def reduced_palm_intensity(ctx: PhdPosteriorContext, x, cond: Sequence,
                           method: PalmMethod = PalmMethod.FIRST_ORDER) -> float:
    """Posterior intensity at ``x`` given targets known at the ``cond`` states.

    ``EXACT_ONE`` and ``EXACT_PAIR`` evaluate the exact conditional moment
    ratios for one and two conditioning targets.  ``FIRST_ORDER`` applies one
    subtractive Palm correction per conditioning target and clamps the result
    at zero; it is exact for a single conditioning target and an
    approximation beyond that.
    """
    cond = list(cond)
    if not cond:
        return c1(ctx, x)
    c1_cond = [c1(ctx, xj) for xj in cond]
    if any(v <= 0.0 for v in c1_cond):
        raise ConditioningOnZeroIntensity(
            "conditioning state has zero posterior intensity")
    if method is PalmMethod.EXACT_ONE:
        if len(cond) != 1:
            raise ValueError("EXACT_ONE requires exactly one conditioning state")
        return c1(ctx, x) + c2(ctx, cond[0], x) / c1_cond[0]
    if method is PalmMethod.EXACT_PAIR:
        if len(cond) != 2:
            raise ValueError("EXACT_PAIR requires exactly two conditioning states")
        x1, x2 = cond
        pair_moment = c1_cond[0] * c1_cond[1] + c2(ctx, x1, x2)
        if pair_moment <= 0.0:
            raise DegenerateDenominator(
                f"second factorial moment {pair_moment} at the conditioning pair")
        cross = (c2(ctx, x1, x) * c1_cond[1]
                 + c2(ctx, x2, x) * c1_cond[0]
                 + c3(ctx, x1, x2, x))
        return c1(ctx, x) + cross / pair_moment
    if method is PalmMethod.FIRST_ORDER:
        value = c1(ctx, x)
        for xj, cj in zip(cond, c1_cond):
            value += c2(ctx, xj, x) / cj
        return max(0.0, value)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class PalmModulation:
    """Per-measurement whitening coefficients for a conditioning set.

    ``alpha[j] <= 1`` always; an alpha near zero means the conditioning
    targets explain measurement ``j`` almost completely.  Negative alphas are
    kept (clamping happens where the coefficients are applied to component
    weights, not here) so the raw correction stays available to diagnostics.
    """

    alpha: np.ndarray
    conditioning_set: tuple
    evaluation_mode: EvalMode

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if np.any(self.alpha > 1.0 + 1e-9):
            raise ValueError("palm modulation coefficients cannot exceed 1")
        if len(self.conditioning_set) == 0 and not np.all(self.alpha == 1.0):
            raise ValueError("empty conditioning set must leave alpha at 1")


def palm_modulation(ctx: PhdPosteriorContext, cond: Sequence,
                    mode: EvalMode = EvalMode.AT_ONE) -> PalmModulation:
    """Compute the Palm correction coefficients for a set of known targets.

    For each measurement j the coefficient is one minus the share of that
    measurement's Bernoulli mass already explained by the conditioning
    states.  The normalizer is the posterior intensity at each conditioning
    state, evaluated in the same mode as the requested denominators.
    """
    cond = tuple(cond)
    alpha = np.ones(ctx.k)
    if cond and ctx.k:
        d = ctx.denominators(mode)
        for xl in cond:
            norm = c1(ctx, xl, mode)
            if norm <= 0.0:
                raise ConditioningOnZeroIntensity(
                    "conditioning state has zero intensity under the requested mode")
            alpha -= ctx.detection_terms(xl) / (d * norm)
    return PalmModulation(alpha=alpha, conditioning_set=cond, evaluation_mode=mode)


@dataclass(frozen=True)
class CanonicalPmf:
    """Truncated pmf of the posterior target count."""

    probabilities: np.ndarray
    n_max: int

    def __post_init__(self):
        object.__setattr__(self, "probabilities",
                           np.asarray(self.probabilities, dtype=float))
        if np.any(self.probabilities < -1e-15):
            raise ValueError("pmf entries must be nonnegative")
        if self.probabilities.sum() > 1.0 + 1e-9:
            raise ValueError("pmf partial sums cannot exceed 1")

    @property
    def tail_mass(self) -> float:
        return max(0.0, 1.0 - float(self.probabilities.sum()))

    def mean(self) -> float:
        n = np.arange(len(self.probabilities))
        return float(np.sum(n * self.probabilities))


def default_n_max(mu_missed: float, k: int) -> int:
    """Truncation point that keeps the Poisson tail far below 1e-12."""
    return int(k + math.ceil(mu_missed) + math.ceil(20.0 * math.sqrt(mu_missed + 1.0)))


def _poisson_pmf(n: np.ndarray, mu: float) -> np.ndarray:
    if mu == 0.0:
        out = np.zeros(len(n))
        out[n == 0] = 1.0
        return out
    from scipy.special import gammaln
    return np.exp(-mu + n * math.log(mu) - gammaln(n + 1.0))


def canonical_pmf_from_mus(mu_missed: float, mu_z: np.ndarray,
                           lambda_z: np.ndarray,
                           n_max: int | None = None,
                           tail_tol: float = 1e-9) -> CanonicalPmf:
    """Cardinality pmf from the missed mass and per-measurement normalizers.

    The count is a Poisson (mean ``mu_missed``) plus independent Bernoullis
    with success odds ``r_j = (mu_z[j] - lambda_z[j]) / lambda_z[j]``.  The
    Bernoulli part is expanded through the normalized polynomial
    ``prod_j (beta_j + q_j t)`` with ``beta_j = lambda/mu_z`` and
    ``q_j = 1 - beta_j``, which keeps every coefficient in [0, 1] and is
    stable for any nonnegative odds.
    """
    mu_z = np.asarray(mu_z, dtype=float)
    lambda_z = np.asarray(lambda_z, dtype=float)
    k = len(mu_z)
    if np.any(lambda_z <= 0.0):
        raise ZeroClutterAtMeasurement("cardinality pmf needs positive clutter "
                                       "at every measurement")
    if n_max is None:
        n_max = default_n_max(mu_missed, k)
    coeff = np.ones(1)
    for beta, q in zip(lambda_z / mu_z, (mu_z - lambda_z) / mu_z):
        coeff = beta * np.append(coeff, 0.0) + q * np.insert(coeff, 0, 0.0)
    probs = np.zeros(n_max + 1)
    n = np.arange(n_max + 1)
    for i in range(min(k, n_max) + 1):
        pois = _poisson_pmf(np.maximum(n - i, 0), mu_missed)
        pois[n < i] = 0.0
        probs += coeff[i] * pois
    pmf = CanonicalPmf(probabilities=np.maximum(probs, 0.0), n_max=n_max)
    if pmf.tail_mass > tail_tol:
        raise TruncationInsufficient(
            f"tail mass {pmf.tail_mass:.3e} beyond n_max={n_max}")
    return pmf


def canonical_pmf(ctx: PhdPosteriorContext, n_max: int | None = None) -> CanonicalPmf:
    """Posterior cardinality pmf of a context."""
    return canonical_pmf_from_mus(ctx.mu_missed, ctx.mu_z, ctx.lambda_z, n_max)


def canonical_estimate(pmf_or_ctx: CanonicalPmf | PhdPosteriorContext,
                       strategy: CardinalityStrategy) -> int:
    """Point estimate of the posterior target count.

    ``MAP_OF_PMF`` takes the pmf argmax (ties break toward the smaller
    count); ``ROUNDED_EXPECTED`` rounds the total posterior mass, halves away
    from zero.
    """
    if strategy is CardinalityStrategy.MAP_OF_PMF:
        pmf = (pmf_or_ctx if isinstance(pmf_or_ctx, CanonicalPmf)
               else canonical_pmf(pmf_or_ctx))
        return int(np.argmax(pmf.probabilities))
    if strategy is CardinalityStrategy.ROUNDED_EXPECTED:
        if isinstance(pmf_or_ctx, CanonicalPmf):
            return round_half_away(pmf_or_ctx.mean())
        return round_half_away(pmf_or_ctx.expected_count)
    raise ValueError(f"unknown strategy {strategy!r}")


def conditional_track_pdf(ctx: PhdPosteriorContext, cond_others: Sequence,
                          support: Quadrature) -> Callable[[Any], float]:
    """Normalized pdf of one remaining target given the other extracted ones.

    Evaluated with clutter denominators (the fixed-cardinality convention),
    corrected by one Palm subtraction per conditioning state, clamped at
    zero, and normalized over the caller-supplied truncation region.
    """
    cond_others = list(cond_others)
    c1_cond = [c1(ctx, xj, EvalMode.AT_ZERO) for xj in cond_others]
    if any(v <= 0.0 for v in c1_cond):
        raise ConditioningOnZeroIntensity(
            "conditioning state has zero fixed-cardinality intensity")

    def unnormalized(x) -> float:
        value = c1(ctx, x, EvalMode.AT_ZERO)
        for xj, cj in zip(cond_others, c1_cond):
            value += c2(ctx, xj, x, EvalMode.AT_ZERO) / cj
        return max(0.0, value)

    total = support(unnormalized)
    if total <= 0.0:
        raise ZeroMassOnSupport("conditional pdf integrates to zero over the "
                                "truncation region")

    def pdf(x) -> float:
        return unnormalized(x) / total

    return pdf


def iid_cluster_ratio(pmf) -> float:
    """Ratio of the conditional to the unconditional intensity for an
    IID-cluster process with the given count pmf.

    Equals ``E[N(N-1)] / E[N]^2``: one for a Poisson count, below one for
    counts tighter than Poisson, above one for counts wider than Poisson.
    """
    probs = pmf.probabilities if isinstance(pmf, CanonicalPmf) else np.asarray(pmf, dtype=float)
    n = np.arange(len(probs), dtype=float)
    mean = float(np.sum(n * probs))
    if mean <= 0.0:
        raise ZeroMeanPmf("pmf has zero mean count")
    second_factorial = float(np.sum(n * (n - 1.0) * probs))
    return second_factorial / (mean * mean)
