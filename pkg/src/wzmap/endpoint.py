"""Short-time energy and bi-threshold endpoint detection.

Maneuver periods (accelerating, decelerating, turning) show up as bursts in
the short-time energy of one acceleration axis. A high threshold t2 flags a
burst; a lower threshold t1 refines where it starts and ends. Everything
here operates on a single axis; combining the x and y schemes happens in
:mod:`wzmap.classify`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroEnergy, SignalTooShort
from .trajectory import TimeInterval


@dataclass(frozen=True)
class EnergyFrameConfig:
    """Framing of the energy transform.

    Defaults are one-second frames with 50% overlap at the 20 Hz accel rate,
    which localizes endpoints to half a second.
    """

    frame_len: int = 20
    hop: int = 10
    window: str = "rectangular"

    def __post_init__(self) -> None:
        if not (1 <= self.hop <= self.frame_len):
            raise ValueError(f"need 1 <= hop <= frame_len, got hop={self.hop} "
                             f"frame_len={self.frame_len}")
        if self.window != "rectangular":
            raise ValueError(f"unsupported window {self.window!r}")


@dataclass(frozen=True)
class EnergySeries:
    """Framed short-time energy of one acceleration axis (m^2/s^4 per frame)."""

    frames: np.ndarray
    config: EnergyFrameConfig
    axis: str = "x"

    def __len__(self) -> int:
        return int(self.frames.size)

    def frame_samples(self, frame_idx: int) -> TimeInterval:
        """Sample range [n*hop, n*hop + frame_len - 1] covered by one frame."""
        start = frame_idx * self.config.hop
        return TimeInterval(start, start + self.config.frame_len - 1)


@dataclass(frozen=True)
class Thresholds:
    """Lower/upper detection thresholds in energy units."""

    t1: float
    t2: float
    mode: str  # "adaptive" or "determinative"

    def __post_init__(self) -> None:
        if not (0 < self.t1 <= self.t2):
            raise ValueError(f"need 0 < t1 <= t2, got t1={self.t1} t2={self.t2}")
        if self.mode not in ("adaptive", "determinative"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")


@dataclass(frozen=True)
class Poi:
    """A period of interest: a detected maneuver burst on one axis."""

    interval: TimeInterval
    axis: str
    peak_energy: float


def moving_average(signal, window: int = 5) -> np.ndarray:
    """Centered moving average with edge shrinkage; optional pre-filter."""
    signal = np.asarray(signal, dtype=float)
    if window <= 1 or signal.size == 0:
        return signal.copy()
    kernel = np.ones(window)
    sums = np.convolve(signal, kernel, mode="same")
    counts = np.convolve(np.ones(signal.size), kernel, mode="same")
    return sums / counts


def short_time_energy(signal, config: EnergyFrameConfig, axis: str = "x") -> EnergySeries:
    """Sum of squares over each sliding frame (rectangular window).

    Frame n covers samples [n*hop, n*hop + frame_len - 1]; trailing samples
    that do not fill a frame are ignored.
    """
    signal = np.asarray(signal, dtype=float)
    n = signal.size
    if n < config.frame_len:
        raise SignalTooShort(
            f"signal has {n} samples, frame needs {config.frame_len}")
    sq = signal * signal
    windows = np.lib.stride_tricks.sliding_window_view(sq, config.frame_len)
    frames = windows[::config.hop].sum(axis=1)
    return EnergySeries(frames=frames, config=config, axis=axis)


def adaptive_thresholds(energy: EnergySeries, t2_frac: float, t1_frac: float) -> Thresholds:
    """Thresholds as fractions of the trace's own maximum frame energy.

    Shields differences between vehicles: a soft-sprung car and a stiff one
    both get bursts extracted relative to their own dynamics.
    """
    _check_fracs(t1_frac, t2_frac)
    peak = float(np.max(energy.frames)) if len(energy) else 0.0
    if peak <= 0.0:
        raise AllZeroEnergy(f"axis {energy.axis}: no energy frame above zero")
    return Thresholds(t1=t1_frac * peak, t2=t2_frac * peak, mode="adaptive")


def adaptive_thresholds_on_accel(signal, config: EnergyFrameConfig,
                                 t2_frac: float, t1_frac: float,
                                 axis: str = "x") -> Thresholds:
    """Variant: fractions apply to max |a| and are then converted to energy.

    t_k = frame_len * (frac_k * max|a|)^2.
    """
    _check_fracs(t1_frac, t2_frac)
    signal = np.asarray(signal, dtype=float)
    peak = float(np.max(np.abs(signal))) if signal.size else 0.0
    if peak <= 0.0:
        raise AllZeroEnergy(f"axis {axis}: signal is identically zero")
    return Thresholds(
        t1=config.frame_len * (t1_frac * peak) ** 2,
        t2=config.frame_len * (t2_frac * peak) ** 2,
        mode="adaptive")


def _check_fracs(t1_frac: float, t2_frac: float) -> None:
    if not (0 < t1_frac <= t2_frac <= 1):
        raise ValueError(
            f"need 0 < t1_frac <= t2_frac <= 1, got ({t1_frac}, {t2_frac})")


def determinative_threshold(accel_limit: float, config: EnergyFrameConfig,
                            t1_frac: float = 0.25) -> Thresholds:
    """Fixed threshold: the energy of a frame sustained at ``accel_limit``.

    1.25 m/s^2 is the conventional passenger-discomfort limit, so bursts
    crossing this t2 mark unsafe behavior regardless of the vehicle.
    A burst must *sustain* the limit for a frame, not merely spike over it.
    """
    if accel_limit <= 0:
        raise ValueError(f"accel_limit must be positive, got {accel_limit}")
    if not (0 < t1_frac <= 1):
        raise ValueError(f"need 0 < t1_frac <= 1, got {t1_frac}")
    t2 = config.frame_len * accel_limit * accel_limit
    return Thresholds(t1=t1_frac * t2, t2=t2, mode="determinative")


def detect_pois(energy: EnergySeries, th: Thresholds,
                min_poi_frames: int = 2, merge_gap_frames: int = 2) -> list[Poi]:
    """Extract maximal bursts: seed where E >= t2, extend while E >= t1.

    Bursts separated by fewer than ``merge_gap_frames`` quiet frames are
    merged; bursts shorter than ``min_poi_frames`` frames are then dropped.
    Returned intervals are in sample indices, sorted and pairwise disjoint
    (overlapping conversions, possible when hop < frame_len/2, are merged).
    """
    frames = energy.frames
    above1 = frames >= th.t1
    above2 = frames >= th.t2
    if not above2.any():
        return []

    # Maximal runs of E >= t1 that contain at least one E >= t2 frame.
    runs = _true_runs(above1)
    regions = [(a, b) for a, b in runs if above2[a:b + 1].any()]

    merged: list[list[int]] = []
    for a, b in regions:
        if merged and a - merged[-1][1] - 1 < merge_gap_frames:
            merged[-1][1] = b
        else:
            merged.append([a, b])

    kept = [(a, b) for a, b in merged if b - a + 1 >= min_poi_frames]

    hop, w = energy.config.hop, energy.config.frame_len
    pois: list[Poi] = []
    for a, b in kept:
        start, end = a * hop, b * hop + w - 1
        peak = float(frames[a:b + 1].max())
        if pois and start <= pois[-1].interval.end_idx:
            prev = pois[-1]
            pois[-1] = Poi(
                interval=TimeInterval(prev.interval.start_idx, max(prev.interval.end_idx, end)),
                axis=energy.axis,
                peak_energy=max(prev.peak_energy, peak))
        else:
            pois.append(Poi(interval=TimeInterval(start, end),
                            axis=energy.axis, peak_energy=peak))
    return pois


def _true_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end] index runs where mask is True."""
    if not mask.any():
        return []
    padded = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(padded == 1)
    ends = np.flatnonzero(padded == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))
