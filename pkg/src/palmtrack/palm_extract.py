"""Two-stage track extraction from a pre-approximation PHD posterior.

Stage one estimates the target count from the posterior.  Stage two pulls
peaks sequentially: after each peak, every measurement component of the
posterior is re-weighted by a Palm modulation coefficient that subtracts the
mass already explained by the extracted targets, with negative weights
clamped to zero.  Stage three builds, for every extracted target, a
fixed-cardinality conditional pdf given the other peaks, truncated to the
peak's neighborhood and normalized, whose mean is the reported state.

Works on both mixture and particle posteriors.  For mixtures the peak is
the heaviest component and modulation touches only component weights; for
particle clouds the peak comes from a two-level position histogram and
modulation reuses the per-measurement weight shares stored by the update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pointproc
from .exceptions import EmptyCloud
from .gm_phd import GaussianMixtureIntensity
from .pointproc import (
    CardinalityStrategy,
    EvalMode,
    PhdPosteriorContext,
    canonical_pmf_from_mus,
    round_half_away,
)
from .smc_phd import ParticleCloud, PeakGrid, smc_peak


@dataclass(frozen=True)
class ExtractorParams:
    """Palm extractor knobs; defaults follow the benchmark setup."""

    cardinality_strategy: CardinalityStrategy = CardinalityStrategy.ROUNDED_EXPECTED
    cluster_horizon: int = 5
    gate_radius: float = 75.0  # particle-pdf truncation radius, meters
    grid: PeakGrid = field(default_factory=PeakGrid)


@dataclass(frozen=True)
class MixturePdf:
    """Normalized Gaussian-mixture pdf over a component subset."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.means


@dataclass(frozen=True)
class ParticlePdf:
    """Normalized weighted-particle pdf over a particle subset."""

    indices: np.ndarray
    weights: np.ndarray
    states: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.states


@dataclass(frozen=True)
class TrackEstimate:
    """One extracted target: its peak, conditional pdf, and pdf mean."""

    peak_state: np.ndarray
    point_estimate: np.ndarray
    conditional_pdf: MixturePdf | ParticlePdf
    cluster_members: np.ndarray


@dataclass(frozen=True)
class ExtractionDiagnostics:
    peak_alphas: tuple           # modulation table after each extracted peak
    pdf_alphas: tuple            # fixed-cardinality modulation per track
    cluster_sizes: tuple
    fallback_tracks: tuple       # tracks whose pdf collapsed to the peak


@dataclass(frozen=True)
class ExtractionResult:
    """Cardinality estimate plus tracks in extraction (peak) order.

    ``degenerate`` is set when the reduced posterior ran out of positive
    mass before the estimated number of peaks was found; ``tracks`` then
    carries fewer entries than ``cardinality``.
    """

    cardinality: int
    tracks: tuple
    diagnostics: ExtractionDiagnostics
    degenerate: bool = False

    @property
    def point_estimates(self) -> list[np.ndarray]:
        return [t.point_estimate for t in self.tracks]


def cluster_by_shared_measurements(histories, horizon: int = 5,
                                   current_scan: int | None = None) -> np.ndarray:
    """Label connected components of the share-a-measurement graph.

    Two components belong to the same cluster when any chain of components
    links them through common (scan, measurement) pairs within the horizon.
    Components with empty histories are singletons.
    """
    n = len(histories)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    seen: dict = {}
    for idx, history in enumerate(histories):
        for entry in history:
            scan, _ = entry
            if current_scan is not None and scan <= current_scan - horizon:
                continue
            if entry in seen:
                union(seen[entry], idx)
            else:
                seen[entry] = idx
    labels = np.array([find(i) for i in range(n)], dtype=int)
    return labels


def _sharing_members(histories, peak_idx: int) -> np.ndarray:
    """Components whose history shares a (scan, measurement) pair with the
    peak's; the peak itself always belongs."""
    peak_hist = histories[peak_idx]
    if not peak_hist:
        return np.array([peak_idx])
    return np.array([i for i, h in enumerate(histories)
                     if i == peak_idx or h & peak_hist])


def extract(intensity, ctx: PhdPosteriorContext | None,
            params: ExtractorParams | None = None) -> ExtractionResult:
    """Run the two-stage Palm extractor on a posterior intensity.

    ``intensity`` is the pre-prune/merge posterior: a
    :class:`GaussianMixtureIntensity` (requires ``ctx`` for the pointwise
    modulation normalizers) or a :class:`ParticleCloud` fresh from its
    measurement update (``ctx`` may be ``None``; the stored weight shares
    carry everything needed).
    """
    params = params or ExtractorParams()
    if isinstance(intensity, GaussianMixtureIntensity):
        if ctx is None:
            raise TypeError("mixture extraction requires a posterior context")
        return _extract_mixture(intensity, ctx, params)
    if isinstance(intensity, ParticleCloud):
        return _extract_cloud(intensity, params)
    raise TypeError(f"cannot extract from {type(intensity).__name__}")


def _estimate_count(strategy: CardinalityStrategy, total_mass: float,
                    mu_missed: float, mu_z: np.ndarray,
                    lambda_z: np.ndarray) -> int:
    if strategy is CardinalityStrategy.ROUNDED_EXPECTED:
        return round_half_away(total_mass)
    pmf = canonical_pmf_from_mus(mu_missed, mu_z, lambda_z)
    return int(np.argmax(pmf.probabilities))


def _empty_result() -> ExtractionResult:
    return ExtractionResult(
        cardinality=0, tracks=(),
        diagnostics=ExtractionDiagnostics((), (), (), ()))


def _extract_mixture(mix: GaussianMixtureIntensity, ctx: PhdPosteriorContext,
                     params: ExtractorParams) -> ExtractionResult:
    n_est = _estimate_count(params.cardinality_strategy, mix.total_mass,
                            ctx.mu_missed, ctx.mu_z, ctx.lambda_z)
    if n_est == 0 or len(mix) == 0:
        return _empty_result()

    base_w = mix.weights
    meas_idx = mix.meas_index
    is_meas = meas_idx >= 0
    safe_idx = np.maximum(meas_idx, 0)

    peaks: list[int] = []
    peak_states: list[np.ndarray] = []
    peak_alphas = []
    weights = base_w
    degenerate = False
    for _ in range(n_est):
        p = int(np.argmax(weights))
        if weights[p] <= 0.0:
            degenerate = True
            break
        peaks.append(p)
        peak_states.append(mix.means[p])
        mod = pointproc.palm_modulation(ctx, peak_states, EvalMode.AT_ONE)
        peak_alphas.append(mod.alpha)
        factors = np.where(is_meas, mod.alpha[safe_idx], 1.0)
        weights = np.maximum(0.0, base_w * factors)

    ratio = ctx.mu_z / ctx.lambda_z if ctx.k else np.zeros(0)

    tracks = []
    pdf_alphas = []
    cluster_sizes = []
    fallbacks = []
    for i, p in enumerate(peaks):
        others = [s for l, s in enumerate(peak_states) if l != i]
        mod0 = pointproc.palm_modulation(ctx, others, EvalMode.AT_ZERO)
        pdf_alphas.append(mod0.alpha)
        factors = np.where(is_meas, (ratio * mod0.alpha)[safe_idx], 1.0)
        pdf_w = np.maximum(0.0, base_w * factors)
        members = _sharing_members(mix.histories, p)
        cluster_sizes.append(len(members))
        total = float(pdf_w[members].sum())
        if total <= 0.0:
            members = np.array([p])
            norm_w = np.ones(1)
            fallbacks.append(i)
        else:
            norm_w = pdf_w[members] / total
        pdf = MixturePdf(weights=norm_w, means=mix.means[members],
                         covs=mix.covs[members])
        tracks.append(TrackEstimate(
            peak_state=mix.means[p].copy(),
            point_estimate=pdf.mean(),
            conditional_pdf=pdf,
            cluster_members=members))

    return ExtractionResult(
        cardinality=n_est, tracks=tuple(tracks),
        diagnostics=ExtractionDiagnostics(
            peak_alphas=tuple(peak_alphas), pdf_alphas=tuple(pdf_alphas),
            cluster_sizes=tuple(cluster_sizes), fallback_tracks=tuple(fallbacks)),
        degenerate=degenerate)


def _extract_cloud(cloud: ParticleCloud,
                   params: ExtractorParams) -> ExtractionResult:
    detail = cloud.update_detail
    if detail is None:
        raise TypeError("cloud extraction needs the measurement-update "
                        "decomposition; extract right after the update")
    n_est = _estimate_count(params.cardinality_strategy, cloud.total_mass,
                            float(detail.missed.sum()), detail.mu_z,
                            detail.lambda_z)
    if n_est == 0 or len(cloud) == 0:
        return _empty_result()

    contrib = detail.per_measurement
    k = contrib.shape[1]

    peaks: list[int] = []
    peak_alphas = []
    weights = cloud.weights
    alpha = np.ones(k)
    degenerate = False
    for _ in range(n_est):
        try:
            _, idx = smc_peak(cloud, params.grid, weights=weights)
        except EmptyCloud:
            degenerate = True
            break
        peaks.append(idx)
        if k:
            alpha = alpha - contrib[idx] / cloud.weights[idx]
        peak_alphas.append(alpha.copy())
        weights = np.maximum(0.0, detail.missed + contrib @ alpha)

    # fixed-cardinality shares: swap each measurement's normalizer for its
    # clutter intensity
    contrib0 = contrib * (detail.mu_z / detail.lambda_z)[None, :] if k else contrib
    gamma = detail.missed + (contrib0.sum(axis=1) if k else 0.0)
    positions = cloud.states[:, [0, 2]]

    tracks = []
    pdf_alphas = []
    cluster_sizes = []
    fallbacks = []
    for i, p in enumerate(peaks):
        alpha0 = np.ones(k)
        for l, q in enumerate(peaks):
            if l != i and k and gamma[q] > 0.0:
                alpha0 = alpha0 - contrib0[q] / gamma[q]
        pdf_alphas.append(alpha0)
        pdf_w = np.maximum(0.0, detail.missed + (contrib0 @ alpha0 if k else 0.0))
        dist = np.linalg.norm(positions - positions[p], axis=1)
        members = np.nonzero((dist <= params.gate_radius) & (pdf_w > 0.0))[0]
        cluster_sizes.append(len(members))
        total = float(pdf_w[members].sum())
        if total <= 0.0 or len(members) == 0:
            members = np.array([p])
            norm_w = np.ones(1)
            fallbacks.append(i)
        else:
            norm_w = pdf_w[members] / total
        pdf = ParticlePdf(indices=members, weights=norm_w,
                          states=cloud.states[members])
        tracks.append(TrackEstimate(
            peak_state=cloud.states[p].copy(),
            point_estimate=pdf.mean(),
            conditional_pdf=pdf,
            cluster_members=members))

    return ExtractionResult(
        cardinality=n_est, tracks=tuple(tracks),
        diagnostics=ExtractionDiagnostics(
            peak_alphas=tuple(peak_alphas), pdf_alphas=tuple(pdf_alphas),
            cluster_sizes=tuple(cluster_sizes), fallback_tracks=tuple(fallbacks)),
        degenerate=degenerate)
