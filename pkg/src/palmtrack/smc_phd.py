"""Sequential Monte Carlo PHD filter with grid-based peak detection.

The intensity function is carried by a weighted particle cloud whose total
mass is the expected target count.  The measurement update keeps, per
particle, the missed-detection contribution and one contribution per
measurement; those decompositions are what the Palm extractor modulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DegenerateMass, EmptyCloud
from .models import MeasurementModel, MotionModel
from .scenario import Scan

_TWO_PI = 2.0 * math.pi

#: Post-resampling jitter covariance (unit-step white-noise-acceleration
#: block, as printed: 0.33 rather than 1/3).
Q_DITHER = np.array([
    [0.33, 0.5, 0.0, 0.0],
    [0.5, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.33, 0.5],
    [0.0, 0.0, 0.5, 1.0],
])

DEFAULT_PARTICLES_PER_COMPONENT = 20_000


@dataclass(frozen=True)
class SmcUpdateDetail:
    """Per-particle weight decomposition of one measurement update.

    ``missed[p]`` is the undetected contribution and ``per_measurement[p, i]``
    the contribution through measurement i, so
    ``weights = missed + per_measurement.sum(axis=1)``.
    """

    missed: np.ndarray
    per_measurement: np.ndarray
    mu_z: np.ndarray
    lambda_z: np.ndarray
    detect_prob: float


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted state samples approximating an intensity function."""

    states: np.ndarray
    weights: np.ndarray
    total_mass: float
    update_detail: SmcUpdateDetail | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float).reshape(-1, 4))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if abs(float(self.weights.sum()) - self.total_mass) > 1e-9 * max(1.0, self.total_mass):
            raise ValueError("weights must sum to total_mass")

    def __len__(self) -> int:
        return len(self.weights)


def smc_init(gm_init, rng: np.random.Generator,
             particles_per_component: int = DEFAULT_PARTICLES_PER_COMPONENT) -> ParticleCloud:
    """Sample an equal number of particles from each initialization Gaussian.

    Particle weights are uniform and sum to the number of components, i.e.
    the expected target count of the initialization mixture.
    """
    states = []
    for j in range(len(gm_init)):
        states.append(rng.multivariate_normal(gm_init.means[j], gm_init.covs[j],
                                              size=particles_per_component))
    states = np.concatenate(states)
    n = len(states)
    mass = float(len(gm_init))
    return ParticleCloud(states=states, weights=np.full(n, mass / n), total_mass=mass)


def smc_predict(cloud: ParticleCloud, model: MotionModel,
                rng: np.random.Generator) -> ParticleCloud:
    """Propagate every particle through the dynamics plus a process-noise
    draw; the transition prior is the importance function, so weights only
    scale by the survival probability."""
    f = model.transition
    q = model.process_noise
    noise = rng.multivariate_normal(np.zeros(4), q, size=len(cloud)) if np.any(q) else 0.0
    states = cloud.states @ f.T + noise
    weights = cloud.weights * model.survival_prob
    return ParticleCloud(states=states, weights=weights,
                         total_mass=float(weights.sum()))


def smc_update(cloud: ParticleCloud, scan: Scan,
               model: MeasurementModel) -> ParticleCloud:
    """PHD measurement update on particle weights.

    Every particle keeps a missed-detection share plus one share per
    measurement, normalized by the clutter intensity plus that
    measurement's total detected mass; the shares are retained on the
    returned cloud for Palm modulation.
    """
    pd = model.detect_prob
    zs = scan.measurements
    k = len(zs)
    missed = (1.0 - pd) * cloud.weights
    if k == 0:
        detail = SmcUpdateDetail(missed=missed,
                                 per_measurement=np.zeros((len(cloud), 0)),
                                 mu_z=np.zeros(0), lambda_z=np.zeros(0),
                                 detect_prob=pd)
        return ParticleCloud(states=cloud.states, weights=missed,
                             total_mass=float(missed.sum()), update_detail=detail)

    positions = cloud.states[:, [0, 2]]
    s2 = model.sigma_m ** 2
    d2 = ((positions[:, None, :] - zs[None, :, :]) ** 2).sum(axis=2)
    with np.errstate(under="ignore"):
        lik = np.exp(-0.5 * d2 / s2) / (_TWO_PI * s2)

    lambda_z = np.full(k, model.clutter_intensity)
    detected_mass = pd * (cloud.weights @ lik)
    mu_z = lambda_z + detected_mass
    per_meas = pd * cloud.weights[:, None] * lik / mu_z[None, :]
    weights = missed + per_meas.sum(axis=1)
    detail = SmcUpdateDetail(missed=missed, per_measurement=per_meas,
                             mu_z=mu_z, lambda_z=lambda_z, detect_prob=pd)
    return ParticleCloud(states=cloud.states, weights=weights,
                         total_mass=float(weights.sum()), update_detail=detail)


def smc_resample_dither(cloud: ParticleCloud, rng: np.random.Generator,
                        count: int | None = None,
                        dither_cov: np.ndarray = Q_DITHER) -> ParticleCloud:
    """Systematic resampling to equal weights plus Gaussian dithering.

    The total mass is preserved exactly; each of the ``count`` output
    particles carries ``total_mass / count``.
    """
    if cloud.total_mass <= 0.0:
        raise DegenerateMass("cannot resample a cloud with zero mass")
    n = count if count is not None else len(cloud)
    probs = cloud.weights / cloud.weights.sum()
    positions = (np.arange(n) + rng.random()) / n
    indices = np.searchsorted(np.cumsum(probs), positions)
    indices = np.minimum(indices, len(cloud) - 1)
    states = cloud.states[indices]
    states = states + rng.multivariate_normal(np.zeros(4), dither_cov, size=n)
    weights = np.full(n, cloud.total_mass / n)
    return ParticleCloud(states=states, weights=weights,
                         total_mass=cloud.total_mass)


@dataclass(frozen=True)
class PeakGrid:
    """Two-level position histogram used to locate intensity peaks.

    The coarse grid covers the surveillance region; the fine grid is laid
    over the winning coarse cell, centered on it.
    """

    origin: tuple = (-2040.0, -2040.0)
    coarse_cells: int = 51
    coarse_size: float = 80.0
    fine_cells: int = 21
    fine_size: float = 4.0


def smc_peak(cloud: ParticleCloud, grid: PeakGrid,
             weights: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Heaviest particle inside the heaviest fine cell of the heaviest
    coarse cell, binning positions only.

    Returns the particle state and its index.  Ties break toward the lowest
    cell index and then the lowest particle index.
    """
    if len(cloud) == 0:
        raise EmptyCloud("peak extraction on an empty cloud")
    w = cloud.weights if weights is None else np.asarray(weights, dtype=float)
    if w.sum() <= 0.0:
        raise EmptyCloud("peak extraction on a cloud with no positive weight")
    pos = cloud.states[:, [0, 2]]
    ox, oy = grid.origin
    nc = grid.coarse_cells
    ix = np.floor((pos[:, 0] - ox) / grid.coarse_size).astype(int)
    iy = np.floor((pos[:, 1] - oy) / grid.coarse_size).astype(int)
    inside = (ix >= 0) & (ix < nc) & (iy >= 0) & (iy < nc) & (w > 0)
    if not np.any(inside):
        raise EmptyCloud("no weighted particles inside the peak grid")
    flat = ix * nc + iy
    sums = np.bincount(flat[inside], weights=w[inside], minlength=nc * nc)
    best = int(np.argmax(sums))
    bx, by = divmod(best, nc)

    in_cell = inside & (ix == bx) & (iy == by)
    center_x = ox + (bx + 0.5) * grid.coarse_size
    center_y = oy + (by + 0.5) * grid.coarse_size
    half_span = grid.fine_cells * grid.fine_size / 2.0
    fx = np.floor((pos[:, 0] - (center_x - half_span)) / grid.fine_size).astype(int)
    fy = np.floor((pos[:, 1] - (center_y - half_span)) / grid.fine_size).astype(int)
    fx = np.clip(fx, 0, grid.fine_cells - 1)
    fy = np.clip(fy, 0, grid.fine_cells - 1)
    fine_flat = fx * grid.fine_cells + fy
    fine_sums = np.bincount(fine_flat[in_cell], weights=w[in_cell],
                            minlength=grid.fine_cells ** 2)
    fine_best = int(np.argmax(fine_sums))

    candidates = np.nonzero(in_cell & (fine_flat == fine_best))[0]
    winner = int(candidates[np.argmax(w[candidates])])
    return cloud.states[winner].copy(), winner


def smc_extract_topcells(cloud: ParticleCloud, grid: PeakGrid,
                         count: int) -> list[np.ndarray]:
    """Simple reference extractor: peak particles of the ``count`` heaviest
    coarse cells."""
    if count <= 0:
        return []
    if len(cloud) == 0:
        raise EmptyCloud("extraction on an empty cloud")
    pos = cloud.states[:, [0, 2]]
    ox, oy = grid.origin
    nc = grid.coarse_cells
    ix = np.floor((pos[:, 0] - ox) / grid.coarse_size).astype(int)
    iy = np.floor((pos[:, 1] - oy) / grid.coarse_size).astype(int)
    inside = (ix >= 0) & (ix < nc) & (iy >= 0) & (iy < nc) & (cloud.weights > 0)
    if not np.any(inside):
        return []
    flat = ix * nc + iy
    sums = np.bincount(flat[inside], weights=cloud.weights[inside], minlength=nc * nc)
    order = np.argsort(-sums, kind="stable")
    states = []
    for cell in order[:count]:
        if sums[cell] <= 0.0:
            break
        members = np.nonzero(inside & (flat == cell))[0]
        winner = int(members[np.argmax(cloud.weights[members])])
        states.append(cloud.states[winner].copy())
    return states
