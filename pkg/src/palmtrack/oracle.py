"""Brute-force Bayes posterior on small discrete models.

This module is the ground truth the closed-form posterior calculus is tested
against.  It never uses the factored missed-plus-Bernoulli structure: the
posterior is obtained by enumerating every target configuration (a multiset
of grid cells), weighting each by its Poisson prior probability times the
association-marginalized measurement likelihood, and normalizing.  Moments,
cardinality pmfs, reduced Palm intensities and conditional pdfs then follow
by direct weighted counting over the enumerated table.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .exceptions import (
    EnumerationTooLarge,
    ZeroFactorialMoment,
    ZeroMassOnSupport,
)
from . import pointproc

_MAX_CONFIGS = 10_000_000
_MAX_LABELINGS = 1_000_000


@dataclass(frozen=True)
class DiscreteModel:
    """A tiny abstract tracking model on a finite state grid.

    States are cells of volume ``cell_volume``; ``prior_intensity`` is per
    unit volume, so the prior cell masses are ``prior_intensity *
    cell_volume``.  ``likelihood[s, j]`` is the sensor density of measurement
    j at state s, and ``clutter[j]`` the clutter intensity at measurement j.
    """

    prior_intensity: np.ndarray
    detect_prob: np.ndarray
    likelihood: np.ndarray
    clutter: np.ndarray
    cell_volume: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "prior_intensity",
                           np.asarray(self.prior_intensity, dtype=float))
        object.__setattr__(self, "detect_prob",
                           np.asarray(self.detect_prob, dtype=float))
        object.__setattr__(self, "likelihood",
                           np.atleast_2d(np.asarray(self.likelihood, dtype=float)))
        object.__setattr__(self, "clutter", np.asarray(self.clutter, dtype=float))
        if self.likelihood.shape != (self.n_states, self.n_measurements):
            raise ValueError("likelihood table must be (n_states, n_measurements)")
        if np.any(self.prior_intensity < 0) or self.cell_volume <= 0:
            raise ValueError("prior intensity and cell volume must be nonnegative")
        if np.any((self.detect_prob < 0) | (self.detect_prob > 1)):
            raise ValueError("detection probabilities must lie in [0, 1]")
        if np.any(self.clutter <= 0):
            raise ValueError("clutter intensity must be positive at every measurement")

    @property
    def n_states(self) -> int:
        return len(self.prior_intensity)

    @property
    def n_measurements(self) -> int:
        return len(self.clutter)

    @property
    def total_prior_mass(self) -> float:
        return float(self.prior_intensity.sum() * self.cell_volume)

    def quadrature(self, fn) -> float:
        return sum(fn(s) for s in range(self.n_states)) * self.cell_volume

    def context(self) -> pointproc.PhdPosteriorContext:
        """Closed-form posterior context over this grid (states and
        measurements are integer indices)."""
        return pointproc.build_context(
            prior_intensity=lambda s: float(self.prior_intensity[s]),
            detect_prob=lambda s: float(self.detect_prob[s]),
            likelihood=lambda z, s: float(self.likelihood[s, z]),
            clutter_intensity=lambda z: float(self.clutter[z]),
            measurements=range(self.n_measurements),
            quadrature=self.quadrature,
        )


def suggest_n_max(model: DiscreteModel, tail_tol: float = 1e-12) -> int:
    """Truncation count with prior-count tail below ``tail_tol``.

    The posterior count never exceeds the prior count plus the number of
    measurements, so a prior Poisson tail bound plus k is a posterior bound.
    """
    mass = model.total_prior_mass
    n = 0
    # survival function of Poisson(mass) at n, crude upper bound via term ratio
    while True:
        log_term = -mass + n * math.log(mass) - math.lgamma(n + 1) if mass > 0 else -math.inf
        if mass == 0.0 or (n > mass and math.exp(log_term) / (1.0 - mass / (n + 1)) < tail_tol / 10):
            break
        n += 1
    return n + model.n_measurements


@lru_cache(maxsize=None)
def _count_vectors(n_cells: int, n_total: int) -> np.ndarray:
    """All per-cell count vectors with total at most ``n_total``."""
    if n_cells == 1:
        return np.arange(n_total + 1, dtype=np.int16).reshape(-1, 1)
    blocks = []
    for first in range(n_total + 1):
        rest = _count_vectors(n_cells - 1, n_total - first)
        col = np.full((len(rest), 1), first, dtype=np.int16)
        blocks.append(np.hstack([col, rest]))
    return np.vstack(blocks)


def _association_groups(model: DiscreteModel) -> list[tuple[np.ndarray, float]]:
    """Sum measurement-to-cell assignment weights, grouped by how many
    measurements each cell receives.

    Each measurement is labeled clutter or attributed to one cell; the
    weight of a labeling is the product of clutter intensities and per-cell
    detection-times-likelihood factors.  The choice of which individual
    target takes each measurement is left to a per-config falling factorial,
    so the groups are configuration independent.
    """
    s, k = model.n_states, model.n_measurements
    if (s + 1) ** k > _MAX_LABELINGS:
        raise EnumerationTooLarge(f"{(s + 1) ** k} association labelings")
    groups: dict[bytes, float] = {}
    det_lik = model.detect_prob[:, None] * model.likelihood
    for labeling in itertools.product(range(-1, s), repeat=k):
        weight = 1.0
        counts = np.zeros(s, dtype=np.int16)
        for j, cell in enumerate(labeling):
            if cell < 0:
                weight *= model.clutter[j]
            else:
                weight *= det_lik[cell, j]
                counts[cell] += 1
        if weight != 0.0:
            key = counts.tobytes()
            groups[key] = groups.get(key, 0.0) + weight
    return [(np.frombuffer(key, dtype=np.int16).copy(), w)
            for key, w in groups.items()]


class EnumeratedPosterior:
    """Exact posterior over enumerated target configurations."""

    def __init__(self, model: DiscreteModel, configs: np.ndarray,
                 probabilities: np.ndarray, n_max: int):
        self.model = model
        self.configs = configs
        self.probabilities = probabilities
        self.n_max = n_max
        base = n_max + 2
        self._keys = configs.astype(np.int64) @ (base ** np.arange(model.n_states, dtype=np.int64))
        self._order = np.argsort(self._keys)
        self._sorted_keys = self._keys[self._order]
        self._key_base = base

    def probability_of(self, counts: np.ndarray) -> float:
        """Posterior probability of an exact configuration (0 if truncated)."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.sum() > self.n_max or np.any(counts < 0):
            return 0.0
        key = counts @ (self._key_base ** np.arange(self.model.n_states, dtype=np.int64))
        pos = np.searchsorted(self._sorted_keys, key)
        if pos < len(self._sorted_keys) and self._sorted_keys[pos] == key:
            return float(self.probabilities[self._order[pos]])
        return 0.0

    def cardinality_pmf(self) -> np.ndarray:
        totals = self.configs.sum(axis=1).astype(np.int64)
        return np.bincount(totals, weights=self.probabilities,
                           minlength=self.n_max + 1)

    def intensity(self) -> np.ndarray:
        """First factorial moment per unit volume at every cell."""
        return (self.probabilities @ self.configs) / self.model.cell_volume

    def second_factorial(self) -> np.ndarray:
        """Second factorial moment density over every cell pair."""
        weighted = self.probabilities[:, None] * self.configs
        raw = weighted.T @ self.configs.astype(float)
        raw[np.diag_indices_from(raw)] -= self.probabilities @ self.configs
        return raw / self.model.cell_volume ** 2

    def _falling_weights(self, cond: np.ndarray) -> np.ndarray:
        """Per-config product of falling factorials for a conditioning
        multiset given as per-cell counts."""
        weights = np.ones(len(self.configs))
        for cell in np.nonzero(cond)[0]:
            m = self.configs[:, cell].astype(float)
            for step in range(int(cond[cell])):
                weights *= np.maximum(m - step, 0.0)
        return weights

    def factorial_moment(self, cells) -> float:
        """Factorial moment density at a multiset of cells."""
        cond = np.bincount(np.asarray(cells, dtype=int),
                           minlength=self.model.n_states)
        order = int(cond.sum())
        value = float(self.probabilities @ self._falling_weights(cond))
        return value / self.model.cell_volume ** order

    def reduced_palm_intensity(self, cond_cells) -> np.ndarray:
        """Intensity at every cell conditioned on targets occupying
        ``cond_cells`` (a multiset of cell indices), those targets removed."""
        cond = np.bincount(np.asarray(cond_cells, dtype=int),
                           minlength=self.model.n_states)
        weighted = self.probabilities * self._falling_weights(cond)
        denom = weighted.sum()
        if denom <= 0.0:
            raise ZeroFactorialMoment("conditioning multiset has zero factorial moment")
        numer = weighted @ self.configs - cond * denom
        return numer / (denom * self.model.cell_volume)

    def conditional_pdf(self, cond_cells, support=None) -> np.ndarray:
        """Pdf (per unit volume) of exactly one additional target at each
        cell given targets at ``cond_cells``, normalized over ``support``."""
        cond = np.bincount(np.asarray(cond_cells, dtype=int),
                           minlength=self.model.n_states)
        raw = np.zeros(self.model.n_states)
        for x in range(self.model.n_states):
            extended = cond.copy()
            extended[x] += 1
            raw[x] = self.probability_of(extended) * extended[x]
        mask = np.zeros(self.model.n_states, dtype=bool)
        mask[list(support) if support is not None else slice(None)] = True
        total = raw[mask].sum()
        if total <= 0.0:
            raise ZeroMassOnSupport("enumerated conditional pdf has zero mass "
                                    "on the support")
        out = np.where(mask, raw / (total * self.model.cell_volume), 0.0)
        return out


def enumerate_posterior(model: DiscreteModel, n_max: int) -> EnumeratedPosterior:
    """Exact Bayes posterior over every configuration of up to ``n_max``
    targets given the model's measurement set."""
    s = model.n_states
    if math.comb(s + n_max, s) > _MAX_CONFIGS:
        raise EnumerationTooLarge(
            f"{math.comb(s + n_max, s)} configurations for {s} states, "
            f"n_max={n_max}")
    configs = _count_vectors(s, n_max)

    cell_mass = model.prior_intensity * model.cell_volume
    lgamma_table = gammaln(np.arange(n_max + 2, dtype=float))
    with np.errstate(divide="ignore"):
        log_cell_mass = np.log(cell_mass)
    log_prior = np.where(configs > 0, configs * log_cell_mass, 0.0).sum(axis=1)
    log_prior -= lgamma_table[configs.astype(np.int64) + 1].sum(axis=1)
    prior = np.exp(log_prior)
    prior[np.any((configs > 0) & (cell_mass == 0.0), axis=1)] = 0.0

    likelihood = _likelihood_over_configs(model, configs, n_max)
    posterior = prior * likelihood
    total = posterior.sum()
    if total <= 0.0:
        raise ZeroFactorialMoment("posterior normalizer is zero")
    return EnumeratedPosterior(model, configs, posterior / total, n_max)


def _likelihood_over_configs(model: DiscreteModel, configs: np.ndarray,
                             n_max: int) -> np.ndarray:
    """Association-marginalized measurement likelihood of every config."""
    groups = _association_groups(model)
    counts = configs.astype(np.int64)
    falling = np.ones((n_max + 1, model.n_measurements + 1))
    for d in range(1, model.n_measurements + 1):
        m = np.arange(n_max + 1, dtype=float)
        falling[:, d] = falling[:, d - 1] * np.maximum(m - (d - 1), 0.0)

    one_minus_pd = 1.0 - model.detect_prob
    fast = np.all(one_minus_pd > 1e-9)
    if fast:
        base = np.exp(counts @ np.log(one_minus_pd))
        like = np.zeros(len(configs))
        for d_vec, weight in groups:
            term = base.copy()
            for cell in np.nonzero(d_vec)[0]:
                d = int(d_vec[cell])
                m = counts[:, cell]
                term *= falling[m, d] / one_minus_pd[cell] ** d
            like += weight * term
        return like

    # exact path for detection probabilities at (or within 1e-9 of) one
    tables = []
    for cell in range(model.n_states):
        m = np.arange(n_max + 1, dtype=float)[:, None]
        d = np.arange(model.n_measurements + 1, dtype=float)[None, :]
        with np.errstate(invalid="ignore"):
            surv = np.where(m - d >= 0, one_minus_pd[cell] ** np.maximum(m - d, 0), 0.0)
        tables.append(falling * surv)
    like = np.zeros(len(configs))
    for d_vec, weight in groups:
        term = np.ones(len(configs))
        for cell in range(model.n_states):
            term *= tables[cell][counts[:, cell], int(d_vec[cell])]
        like += weight * term
    return like


@dataclass(frozen=True)
class OracleMoments:
    """Moment bundle of an enumerated posterior."""

    m1: np.ndarray
    m2: np.ndarray
    canonical_pmf: np.ndarray
    posterior: EnumeratedPosterior

    def reduced_palm(self, cond_cells) -> np.ndarray:
        return self.posterior.reduced_palm_intensity(cond_cells)

    def conditional_pdf(self, cond_cells, support=None) -> np.ndarray:
        return self.posterior.conditional_pdf(cond_cells, support)


def oracle_moments(posterior: EnumeratedPosterior) -> OracleMoments:
    """First and second factorial moments, cardinality pmf, and accessors
    for reduced Palm intensities of an enumerated posterior."""
    return OracleMoments(
        m1=posterior.intensity(),
        m2=posterior.second_factorial(),
        canonical_pmf=posterior.cardinality_pmf(),
        posterior=posterior,
    )
