"""Two-target benchmark scenario: truth kinematics and noisy scan generation.

The default setup flies two targets toward each other on mirrored coordinated
turns, holds them in parallel 90 m apart, then turns them away again.  Truth
is noise-free; process noise exists only inside the tracking filters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import MeasurementModel

_DEFAULT_INITIAL_STATES = (
    (-1700.0, 0.0, 1000.0, -50.0),
    (-1700.0, 0.0, -1000.0, 50.0),
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry and sensing settings for the benchmark scenario.

    Scan ``i`` samples the trajectory at ``t = i / scan_rate_hz`` seconds
    with motion starting at t = 0; segment boundaries fall at the cumulative
    segment lengths.  Targets always report a correctly associated
    measurement during the first ``init_scans`` scans.
    """

    initial_states: tuple = _DEFAULT_INITIAL_STATES
    turn_rate_deg: float = 3.0
    segment_lengths: tuple = (30.0, 30.0, 30.0)
    scan_rate_hz: float = 1.0
    detect_prob: float = 0.98
    clutter_mean: float = 10.0
    seed: int = 0
    init_scans: int = 10

    @property
    def n_scans(self) -> int:
        return int(round(sum(self.segment_lengths) * self.scan_rate_hz)) + 1

    @property
    def dt(self) -> float:
        return 1.0 / self.scan_rate_hz


@dataclass(frozen=True)
class Scan:
    """One time step's measurement set.

    ``sources[i]`` is the emitting target index or -1 for clutter; it exists
    for initialization and diagnostics, the filters ignore it after the
    initialization scans.
    """

    index: int
    time: float
    measurements: np.ndarray
    sources: np.ndarray

    @property
    def truth_assoc(self) -> dict[int, int]:
        return {i: int(s) for i, s in enumerate(self.sources) if s >= 0}


def _turn_step(state: np.ndarray, omega: float, tau: float) -> np.ndarray:
    """Exact constant-rate coordinated turn over ``tau`` seconds."""
    x, vx, y, vy = state
    c, s = math.cos(omega * tau), math.sin(omega * tau)
    nvx = c * vx - s * vy
    nvy = s * vx + c * vy
    nx = x + (s * vx - (1.0 - c) * vy) / omega
    ny = y + ((1.0 - c) * vx + s * vy) / omega
    return np.array([nx, nvx, ny, nvy])


def _straight_step(state: np.ndarray, tau: float) -> np.ndarray:
    x, vx, y, vy = state
    return np.array([x + tau * vx, vx, y + tau * vy, vy])


def generate_truth(cfg: ScenarioConfig) -> np.ndarray:
    """Noise-free truth states, shape (n_targets, n_scans, 4).

    Segment 1 and segment 3 are constant-rate turns, segment 2 is straight
    and level.  Each target's turn sense points it toward the +x axis after
    the first turn: a target initially heading -y turns counterclockwise,
    one heading +y turns clockwise, which makes the default pair mirror
    images about y = 0.  Scans beyond the last segment extrapolate straight.
    """
    omega_mag = math.radians(cfg.turn_rate_deg)
    b1 = cfg.segment_lengths[0]
    b2 = b1 + cfg.segment_lengths[1]
    b3 = b2 + cfg.segment_lengths[2]
    dt = cfg.dt
    out = []
    for init in cfg.initial_states:
        state = np.asarray(init, dtype=float)
        sense = 1.0 if state[3] < 0 else -1.0
        omega = sense * omega_mag
        states = []
        for i in range(cfg.n_scans):
            t0 = i * dt
            if t0 < b1 and omega != 0.0:
                state = _turn_step(state, omega, dt)
            elif t0 < b2 or omega == 0.0:
                state = _straight_step(state, dt)
            elif t0 < b3:
                state = _turn_step(state, omega, dt)
            else:
                state = _straight_step(state, dt)
            states.append(state)
        out.append(np.stack(states))
    return np.stack(out)


def generate_measurements(truth: np.ndarray, model: MeasurementModel,
                          rng: np.random.Generator,
                          init_scans: int = 10, dt: float = 1.0) -> list[Scan]:
    """Detections plus uniform Poisson clutter for every scan.

    Targets are detected independently with the model's detection
    probability except during the first ``init_scans`` scans, where every
    target always reports.  Measurement order is shuffled within each scan.
    """
    n_targets, n_scans, _ = truth.shape
    h = model.fov_halfwidth
    scans = []
    for i in range(n_scans):
        scan_no = i + 1
        points = []
        sources = []
        for tgt in range(n_targets):
            detected = scan_no <= init_scans or rng.random() < model.detect_prob
            if detected:
                state = truth[tgt, i]
                z = np.array([state[0], state[2]]) + model.sigma_m * rng.standard_normal(2)
                points.append(z)
                sources.append(tgt)
        n_clutter = rng.poisson(model.clutter_mean)
        for _ in range(n_clutter):
            points.append(rng.uniform(-h, h, 2))
            sources.append(-1)
        if points:
            measurements = np.stack(points)
            sources = np.array(sources, dtype=int)
            perm = rng.permutation(len(points))
            measurements = measurements[perm]
            sources = sources[perm]
        else:
            measurements = np.zeros((0, 2))
            sources = np.zeros(0, dtype=int)
        scans.append(Scan(index=scan_no, time=scan_no * dt,
                          measurements=measurements, sources=sources))
    return scans


def truth_positions(truth: np.ndarray, scan_index: int) -> np.ndarray:
    """Positions (n_targets, 2) of all targets at a 1-based scan index."""
    states = truth[:, scan_index - 1]
    return states[:, [0, 2]]


def write_truth_csv(path: str | Path, truth: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan", "target", "x", "y"])
        for tgt in range(truth.shape[0]):
            for i in range(truth.shape[1]):
                writer.writerow([i + 1, tgt, repr(float(truth[tgt, i, 0])),
                                 repr(float(truth[tgt, i, 2]))])


def write_scans_csv(path: str | Path, scans: list[Scan]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scan", "source", "x", "y"])
        for scan in scans:
            for z, src in zip(scan.measurements, scan.sources):
                writer.writerow([scan.index, int(src),
                                 repr(float(z[0])), repr(float(z[1]))])


def read_scans_csv(path: str | Path, dt: float = 1.0) -> list[Scan]:
    """Rebuild scans from the CSV written by :func:`write_scans_csv`."""
    by_scan: dict[int, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            by_scan.setdefault(int(row["scan"]), []).append(
                (int(row["source"]), float(row["x"]), float(row["y"])))
    scans = []
    for idx in sorted(by_scan):
        rows = by_scan[idx]
        measurements = np.array([[x, y] for _, x, y in rows]) if rows else np.zeros((0, 2))
        sources = np.array([s for s, _, _ in rows], dtype=int)
        scans.append(Scan(index=idx, time=idx * dt,
                          measurements=measurements, sources=sources))
    return scans
