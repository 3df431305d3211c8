"""Feature extraction for maneuver classification.

Each period of interest becomes a 5-vector:

* k       least-squares slope of speed against time (m/s^2)
* x_mean  mean longitudinal acceleration (m/s^2)
* x_std   population std of longitudinal acceleration
* y_mean  mean lateral acceleration (m/s^2)
* y_std   population std of lateral acceleration

The slope separates accelerating from decelerating even when individual
samples are noisy; the lateral statistics separate left from right turns
and steady turns from lane changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeatureRange, IntervalTooShort
from .trajectory import TimeInterval, Trajectory

FEATURE_NAMES = ("k", "x_mean", "x_std", "y_mean", "y_std")
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    k: float
    x_mean: float
    x_std: float
    y_mean: float
    y_std: float

    def as_array(self) -> np.ndarray:
        return np.array([self.k, self.x_mean, self.x_std,
                         self.y_mean, self.y_std], dtype=float)

    @classmethod
    def from_array(cls, a) -> "FeatureVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (N_FEATURES,):
            raise ValueError(f"expected shape ({N_FEATURES},), got {a.shape}")
        return cls(*(float(v) for v in a))


def extract_features(traj: Trajectory, interval: TimeInterval) -> FeatureVector:
    """Feature vector of one sample interval of a trajectory."""
    if interval.start_idx < 0 or interval.end_idx >= len(traj):
        raise IndexError(f"{interval} out of range for trajectory of "
                         f"length {len(traj)}")
    if len(interval) < 2:
        raise IntervalTooShort(
            f"need at least 2 samples for a slope, got {len(interval)}")
    sl = interval.slice()
    t = traj.t[sl]
    v = traj.speed[sl]
    # polyfit would work too, but the closed form keeps this dependency-light
    # and exact for the constant-dt case.
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    k = float(np.dot(tc, v - v.mean()) / denom)
    ax = traj.ax[sl]
    ay = traj.ay[sl]
    return FeatureVector(
        k=k,
        x_mean=float(ax.mean()),
        x_std=float(ax.std()),
        y_mean=float(ay.mean()),
        y_std=float(ay.std()),
    )


def feature_matrix(traj: Trajectory, intervals) -> np.ndarray:
    """Stack features of several intervals into an (n, 5) matrix."""
    if not intervals:
        return np.empty((0, N_FEATURES), dtype=float)
    return np.vstack([extract_features(traj, iv).as_array() for iv in intervals])


def fit_normalization(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (min, max) over a feature matrix.

    A column with zero range cannot be mapped onto [0, 1]; that only happens
    with degenerate training data, so it is an error rather than a silent
    divide-by-zero.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError(f"expected a nonempty 2-d matrix, got shape {features.shape}")
    lo = features.min(axis=0)
    hi = features.max(axis=0)
    flat = np.flatnonzero(hi - lo <= 0)
    if flat.size:
        names = ", ".join(FEATURE_NAMES[i] for i in flat)
        raise DegenerateFeatureRange(f"feature(s) with zero range: {names}")
    return lo, hi


def normalize(features: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Map each column linearly so that [lo, hi] becomes [0, 1].

    Values outside the fitted range map outside [0, 1]; clamping would fold
    distinct out-of-range inputs onto the same point.
    """
    features = np.asarray(features, dtype=float)
    return (features - lo) / (hi - lo)


def denormalize(scaled: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    scaled = np.asarray(scaled, dtype=float)
    return scaled * (hi - lo) + lo
