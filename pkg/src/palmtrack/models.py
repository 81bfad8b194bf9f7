"""Linear-Gaussian motion and measurement models shared by the filters and
the scenario simulator.

State vectors are ``[x, vx, y, vy]`` in meters and meters per second;
measurements are ``[x, y]`` positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity dynamics with white-noise-acceleration process noise.

    ``sigma_p`` is the acceleration noise intensity; the per-axis noise block
    is the continuous white-noise-acceleration form
    ``sigma_p^2 * [[T^3/3, T^2/2], [T^2/2, T]]``.
    """

    dt: float = 1.0
    sigma_p: float = 5.0
    survival_prob: float = 1.0

    @property
    def transition(self) -> np.ndarray:
        t = self.dt
        return np.array([
            [1.0, t, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, t],
            [0.0, 0.0, 0.0, 1.0],
        ])

    @property
    def process_noise(self) -> np.ndarray:
        t = self.dt
        block = self.sigma_p ** 2 * np.array([
            [t ** 3 / 3.0, t ** 2 / 2.0],
            [t ** 2 / 2.0, t],
        ])
        q = np.zeros((4, 4))
        q[:2, :2] = block
        q[2:, 2:] = block
        return q


@dataclass(frozen=True)
class MeasurementModel:
    """Linear position sensor with uniform Poisson clutter over a square
    field of view."""

    sigma_m: float = 25.0
    detect_prob: float = 0.98
    clutter_mean: float = 10.0
    fov_halfwidth: float = 2000.0

    @property
    def observation(self) -> np.ndarray:
        return np.array([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ])

    @property
    def noise_cov(self) -> np.ndarray:
        return self.sigma_m ** 2 * np.eye(2)

    @property
    def fov_area(self) -> float:
        return (2.0 * self.fov_halfwidth) ** 2

    @property
    def clutter_intensity(self) -> float:
        """Clutter intensity per unit area inside the field of view."""
        return self.clutter_mean / self.fov_area


def gaussian_predict(mean: np.ndarray, cov: np.ndarray,
                     model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    """One Kalman time update: returns (F m, F P F' + Q)."""
    f = model.transition
    return f @ mean, f @ cov @ f.T + model.process_noise


def gaussian_likelihood(z: np.ndarray, x: np.ndarray,
                        model: MeasurementModel) -> float:
    """Density of measurement ``z`` for a target at state ``x``."""
    hx = np.array([x[0], x[2]])
    d2 = float(np.sum((np.asarray(z) - hx) ** 2))
    s2 = model.sigma_m ** 2
    return math.exp(-0.5 * d2 / s2) / (_TWO_PI * s2)


def clutter_intensity_at(y: np.ndarray, model: MeasurementModel) -> float:
    """Clutter intensity at a measurement point; zero outside the fov."""
    y = np.asarray(y)
    h = model.fov_halfwidth
    if abs(float(y[0])) <= h and abs(float(y[1])) <= h:
        return model.clutter_intensity
    return 0.0


def kalman_update(mean: np.ndarray, cov: np.ndarray, z: np.ndarray,
                  model: MeasurementModel) -> tuple[np.ndarray, np.ndarray, float]:
    """One Kalman measurement update.

    Returns the posterior mean, posterior covariance, and the innovation
    likelihood (the predicted-measurement density at ``z``).
    """
    h = model.observation
    r = model.noise_cov
    z_pred = h @ mean
    s = h @ cov @ h.T + r
    s_inv = np.linalg.inv(s)
    gain = cov @ h.T @ s_inv
    innovation = np.asarray(z) - z_pred
    post_mean = mean + gain @ innovation
    post_cov = cov - gain @ h @ cov
    det = float(np.linalg.det(s))
    lik = math.exp(-0.5 * float(innovation @ s_inv @ innovation)) / (_TWO_PI * det ** 0.5)
    return post_mean, post_cov, lik


def gaussian_density(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal density for small fixed dimensions."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    diff = x - mean
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, diff)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return math.exp(-0.5 * float(sol @ sol) - 0.5 * log_det
                    - 0.5 * x.size * math.log(_TWO_PI))
