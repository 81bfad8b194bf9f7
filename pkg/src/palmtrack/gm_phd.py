"""Gaussian-mixture PHD filter with weight-threshold state extraction.

The mixture is stored as parallel arrays (weights, means, covariances) so
the measurement update stays vectorized; components additionally remember
which measurement of the current scan created them and which (scan,
measurement) pairs updated their lineage recently.  That bookkeeping is what
the Palm extractor's clustering and modulation consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import pointproc
from .exceptions import MissingAssignment
from .models import MeasurementModel, MotionModel, kalman_update
from .pointproc import PhdPosteriorContext, round_half_away
from .scenario import Scan

HISTORY_HORIZON = 5

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GaussianComponent:
    """Read-only view of one mixture component."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    meas_index: int
    history: frozenset


@dataclass(frozen=True)
class GaussianMixtureIntensity:
    """Weighted Gaussian components approximating an intensity function.

    ``meas_index[j]`` is the measurement (within the most recent update's
    scan) that created component j, or -1 for missed-detection copies and
    predicted components.  ``histories[j]`` holds the (scan, measurement)
    pairs that updated the component's lineage within the last
    ``HISTORY_HORIZON`` scans.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    meas_index: np.ndarray
    histories: tuple
    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 500

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float).reshape(-1, 4))
        object.__setattr__(self, "covs", np.asarray(self.covs, dtype=float).reshape(-1, 4, 4))
        object.__setattr__(self, "meas_index", np.asarray(self.meas_index, dtype=int))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def component(self, j: int) -> GaussianComponent:
        return GaussianComponent(float(self.weights[j]), self.means[j],
                                 self.covs[j], int(self.meas_index[j]),
                                 self.histories[j])

    @property
    def components(self) -> list[GaussianComponent]:
        return [self.component(j) for j in range(len(self))]

    def intensity_at(self, x: np.ndarray) -> float:
        """Mixture intensity value at a state."""
        return float(sum(self.weights[j] * _gaussian4(x, self.means[j], self.covs[j])
                         for j in range(len(self))))


def empty_mixture(**thresholds) -> GaussianMixtureIntensity:
    return GaussianMixtureIntensity(
        weights=np.zeros(0), means=np.zeros((0, 4)), covs=np.zeros((0, 4, 4)),
        meas_index=np.zeros(0, dtype=int), histories=(), **thresholds)


def _gaussian4(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    diff = np.asarray(x, dtype=float) - mean
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, diff)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return math.exp(-0.5 * float(sol @ sol) - 0.5 * log_det - 2.0 * math.log(_TWO_PI))


def _truncate_history(history: frozenset, current_scan: int,
                      horizon: int) -> frozenset:
    if not history:
        return history
    cutoff = current_scan - horizon
    if all(s > cutoff for s, _ in history):
        return history
    return frozenset((s, m) for s, m in history if s > cutoff)


def init_two_point(init_scans: list[Scan], meas_model: MeasurementModel,
                   motion_model: MotionModel) -> GaussianMixtureIntensity:
    """Initialize one Kalman track per target by two-point differencing and
    run it through the remaining initialization scans.

    Needs the correctly associated measurements of every target in every
    initialization scan.  Returns a two-component mixture with unit weights,
    i.e. an expected target count of two.
    """
    n_targets = max(len(s.truth_assoc) for s in init_scans)
    dt = motion_model.dt
    r = meas_model.noise_cov
    weights, means, covs, histories = [], [], [], []
    for tgt in range(n_targets):
        picks = []
        for scan in init_scans:
            match = [i for i, t in scan.truth_assoc.items() if t == tgt]
            if not match:
                raise MissingAssignment(
                    f"target {tgt} has no assigned measurement in scan {scan.index}")
            picks.append((scan.index, match[0], scan.measurements[match[0]]))
        (_, _, z1), (_, _, z2) = picks[0], picks[1]
        mean = np.array([z2[0], (z2[0] - z1[0]) / dt, z2[1], (z2[1] - z1[1]) / dt])
        s2 = float(r[0, 0])
        axis = np.array([[s2, s2 / dt], [s2 / dt, 2.0 * s2 / dt ** 2]])
        cov = np.zeros((4, 4))
        cov[:2, :2] = axis
        cov[2:, 2:] = axis
        history = set()
        for scan_no, meas_idx, z in picks[2:]:
            f = motion_model.transition
            mean = f @ mean
            cov = f @ cov @ f.T + motion_model.process_noise
            mean, cov, _ = kalman_update(mean, cov, z, meas_model)
            history.add((scan_no, meas_idx))
        history.add(picks[0][:2])
        history.add(picks[1][:2])
        last_scan = picks[-1][0]
        weights.append(1.0)
        means.append(mean)
        covs.append(cov)
        histories.append(_truncate_history(frozenset(history), last_scan,
                                           HISTORY_HORIZON))
    return GaussianMixtureIntensity(
        weights=np.array(weights), means=np.stack(means), covs=np.stack(covs),
        meas_index=np.full(n_targets, -1), histories=tuple(histories))


def gm_predict(mix: GaussianMixtureIntensity,
               model: MotionModel) -> GaussianMixtureIntensity:
    """Kalman-predict every component; weights scale by the survival
    probability."""
    if len(mix) == 0:
        return mix
    f = model.transition
    means = mix.means @ f.T
    covs = np.einsum("ab,jbc,dc->jad", f, mix.covs, f) + model.process_noise
    return replace(mix, weights=mix.weights * model.survival_prob,
                   means=means, covs=covs,
                   meas_index=np.full(len(mix), -1))


def _innovation_stats(mix: GaussianMixtureIntensity,
                      model: MeasurementModel):
    """Per-component innovation covariance pieces: S, S^-1, det S."""
    h = model.observation
    s = np.einsum("ab,jbc,dc->jad", h, mix.covs, h) + model.noise_cov
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    inv = np.empty_like(s)
    inv[:, 0, 0] = s[:, 1, 1]
    inv[:, 1, 1] = s[:, 0, 0]
    inv[:, 0, 1] = -s[:, 0, 1]
    inv[:, 1, 0] = -s[:, 1, 0]
    inv /= det[:, None, None]
    return s, inv, det


def measurement_gaussians(mix: GaussianMixtureIntensity,
                          model: MeasurementModel,
                          measurements: np.ndarray) -> np.ndarray:
    """Predicted-measurement densities q[j, i] = N(z_i; H m_j, S_j)."""
    if len(mix) == 0 or len(measurements) == 0:
        return np.zeros((len(mix), len(measurements)))
    h = model.observation
    _, inv, det = _innovation_stats(mix, model)
    diff = measurements[None, :, :] - (mix.means @ h.T)[:, None, :]
    maha = np.einsum("jid,jde,jie->ji", diff, inv, diff)
    with np.errstate(under="ignore"):
        return np.exp(-0.5 * maha) / (_TWO_PI * np.sqrt(det))[:, None]


def gm_update(mix: GaussianMixtureIntensity, scan: Scan,
              model: MeasurementModel,
              history_horizon: int = HISTORY_HORIZON) -> GaussianMixtureIntensity:
    """PHD measurement update: missed-detection copies plus one
    Kalman-updated copy per (component, measurement) pair.

    Per-measurement weights are normalized by the clutter intensity plus the
    total detected mass for that measurement.  Components whose weight
    underflows to exactly zero are dropped; nothing else is pruned here, the
    output is the full pre-management posterior.
    """
    if len(mix) == 0:
        return mix
    pd = model.detect_prob
    zs = scan.measurements
    k = len(zs)
    trunc = tuple(_truncate_history(hist, scan.index, history_horizon)
                  for hist in mix.histories)

    missed_w = (1.0 - pd) * mix.weights
    if k == 0:
        return replace(mix, weights=missed_w, meas_index=np.full(len(mix), -1),
                       histories=trunc)

    q = measurement_gaussians(mix, model, zs)
    denoms = model.clutter_intensity + pd * (mix.weights @ q)

    h = model.observation
    _, inv, _ = _innovation_stats(mix, model)
    gain = np.einsum("jab,cb,jcd->jad", mix.covs, h, inv)
    post_cov = mix.covs - np.einsum("jab,bc,jcd->jad", gain, h, mix.covs)
    diff = zs[None, :, :] - (mix.means @ h.T)[:, None, :]
    post_means = mix.means[:, None, :] + np.einsum("jab,jib->jia", gain, diff)
    det_w = pd * mix.weights[:, None] * q / denoms[None, :]

    weights = [missed_w]
    means = [mix.means]
    covs = [mix.covs]
    meas_index = [np.full(len(mix), -1)]
    histories = list(trunc)
    for i in range(k):
        weights.append(det_w[:, i])
        means.append(post_means[:, i, :])
        covs.append(post_cov)
        meas_index.append(np.full(len(mix), i))
        histories.extend(hist | {(scan.index, i)} for hist in trunc)

    weights = np.concatenate(weights)
    keep = weights > 0.0
    keep[:len(mix)] = True  # missed copies stay even at zero weight
    out = GaussianMixtureIntensity(
        weights=weights[keep],
        means=np.concatenate(means)[keep],
        covs=np.concatenate(covs)[keep],
        meas_index=np.concatenate(meas_index)[keep],
        histories=tuple(h for h, k_ in zip(histories, keep) if k_),
        prune_threshold=mix.prune_threshold,
        merge_threshold=mix.merge_threshold,
        max_components=mix.max_components)
    return out


def gm_manage(mix: GaussianMixtureIntensity) -> GaussianMixtureIntensity:
    """Prune light components, merge close ones, cap the component count.

    Merging absorbs, in descending weight order, every remaining component
    within the merge threshold (squared Mahalanobis distance under the
    candidate's own covariance) into a moment-matched replacement whose
    history is the union of its parents'.
    """
    keep = np.nonzero(mix.weights >= mix.prune_threshold)[0]
    weights = mix.weights[keep]
    means = mix.means[keep]
    covs = mix.covs[keep]
    meas_index = mix.meas_index[keep]
    histories = [mix.histories[j] for j in keep]

    merged_w, merged_m, merged_p, merged_mi, merged_h = [], [], [], [], []
    remaining = list(range(len(weights)))
    inv_covs = np.linalg.inv(covs) if len(weights) else covs
    while remaining:
        j = max(remaining, key=lambda idx: (weights[idx], -idx))
        absorb = [i for i in remaining
                  if float((means[i] - means[j]) @ inv_covs[i] @ (means[i] - means[j]))
                  <= mix.merge_threshold]
        w = float(weights[absorb].sum()) if len(absorb) > 1 else float(weights[j])
        if len(absorb) == 1:
            m, p = means[j], covs[j]
        else:
            w_arr = weights[absorb]
            m = (w_arr @ means[absorb]) / w
            dev = means[absorb] - m
            p = np.einsum("i,iab->ab", w_arr, covs[absorb]
                          + np.einsum("ia,ib->iab", dev, dev)) / w
        merged_w.append(w)
        merged_m.append(m)
        merged_p.append(p)
        merged_mi.append(int(meas_index[j]))
        merged_h.append(frozenset().union(*(histories[i] for i in absorb)))
        remaining = [i for i in remaining if i not in absorb]

    if merged_w:
        weights = np.array(merged_w)
        means = np.stack(merged_m)
        covs = np.stack(merged_p)
        meas_index = np.array(merged_mi)
        histories = merged_h
    else:
        weights = np.zeros(0)
        means = np.zeros((0, 4))
        covs = np.zeros((0, 4, 4))
        meas_index = np.zeros(0, dtype=int)
        histories = []

    if len(weights) > mix.max_components:
        order = np.argsort(-weights, kind="stable")[:mix.max_components]
        order = np.sort(order)
        weights = weights[order]
        means = means[order]
        covs = covs[order]
        meas_index = meas_index[order]
        histories = [histories[i] for i in order]

    return replace(mix, weights=weights, means=means, covs=covs,
                   meas_index=meas_index, histories=tuple(histories))


def gm_extract_baseline(mix: GaussianMixtureIntensity,
                        min_weight: float = 0.5) -> list[np.ndarray]:
    """Means of components above the extraction weight, each repeated
    once per rounded unit of weight."""
    states = []
    for j in range(len(mix)):
        w = float(mix.weights[j])
        if w >= min_weight:
            for _ in range(max(1, round_half_away(w))):
                states.append(mix.means[j].copy())
    return states


def gm_posterior_context(predicted: GaussianMixtureIntensity,
                         model: MeasurementModel,
                         measurements: np.ndarray) -> PhdPosteriorContext:
    """Closed-form posterior context for a Gaussian-mixture prior.

    The normalizing integrals are exact Gaussian products, and the pointwise
    evaluators are the mixture intensity, the constant detection
    probability, the sensor density, and the uniform clutter intensity.
    """
    from .models import clutter_intensity_at, gaussian_likelihood
    from .pointproc import PhdPosteriorContext as Ctx
    from .exceptions import EmptyPrior, ZeroClutterAtMeasurement

    measurements = np.asarray(measurements, dtype=float).reshape(-1, 2)
    if predicted.total_mass <= 0.0:
        raise EmptyPrior("predicted mixture has zero mass")
    lambda_z = np.array([clutter_intensity_at(z, model) for z in measurements])
    if np.any(lambda_z <= 0.0):
        raise ZeroClutterAtMeasurement("a measurement lies where clutter "
                                       "intensity is zero")
    pd = model.detect_prob
    q = measurement_gaussians(predicted, model, measurements)
    mu_z = lambda_z + pd * (predicted.weights @ q)
    mu_missed = (1.0 - pd) * predicted.total_mass

    chols = np.linalg.cholesky(predicted.covs) if len(predicted) else None
    log_dets = (2.0 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
                if len(predicted) else None)

    def prior_intensity(x) -> float:
        x = np.asarray(x, dtype=float)
        diff = x[None, :] - predicted.means
        sol = np.linalg.solve(chols, diff[:, :, None])[:, :, 0]
        expo = -0.5 * np.sum(sol * sol, axis=1) - 0.5 * log_dets - 2.0 * math.log(_TWO_PI)
        with np.errstate(under="ignore"):
            return float(predicted.weights @ np.exp(expo))

    return Ctx(
        prior_intensity=prior_intensity,
        detect_prob=lambda x: pd,
        likelihood=lambda z, x: gaussian_likelihood(z, x, model),
        clutter_intensity=lambda z: clutter_intensity_at(z, model),
        measurements=tuple(map(tuple, measurements)),
        mu_missed=float(mu_missed),
        mu_z=mu_z,
        lambda_z=lambda_z,
    )
