"""Scheme combination and full-timeline behavior classification.

Endpoint detection runs independently on the longitudinal and lateral
acceleration axes. The two POI schemes are merged by interval union, every
remaining sample gets Stopping or LC from a speed rule, and each merged POI
is labeled by the trained classifier. The result partitions the trajectory
exactly: every sample belongs to one segment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .endpoint import (EnergyFrameConfig, Poi, adaptive_thresholds,
                       adaptive_thresholds_on_accel, determinative_threshold,
                       detect_pois, short_time_energy)
from .errors import AllZeroEnergy, DataError
from .features import extract_features
from .labels import RULE_LABELS, BehaviorLabel, is_poi_label, parse_label
from .svm import SvmModel
from .textio import atomic_write_text
from .trajectory import TimeInterval, Trajectory


@dataclass(frozen=True)
class Segment:
    """A labeled interval; rule segments carry Stopping/LC, svm the rest."""

    interval: TimeInterval
    label: BehaviorLabel
    source: str  # "rule" or "svm"

    def __post_init__(self) -> None:
        if self.source not in ("rule", "svm"):
            raise ValueError(f"unknown source {self.source!r}")
        if (self.source == "rule") != (self.label in RULE_LABELS):
            raise ValueError(
                f"label {self.label.value} cannot come from source {self.source}")


@dataclass
class SegmentTimeline:
    """Ordered segments exactly partitioning samples [0, n_samples - 1]."""

    trajectory_id: str
    n_samples: int
    segments: list[Segment] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n_samples <= 0:
            raise ValueError("timeline needs at least one sample")
        expect = 0
        for seg in self.segments:
            if seg.interval.start_idx != expect:
                raise ValueError(
                    f"{self.trajectory_id}: segment starts at "
                    f"{seg.interval.start_idx}, expected {expect}")
            expect = seg.interval.end_idx + 1
        if expect != self.n_samples:
            raise ValueError(
                f"{self.trajectory_id}: segments cover [0, {expect - 1}], "
                f"trajectory has {self.n_samples} samples")

    def sample_labels(self) -> list[BehaviorLabel]:
        """Per-sample label array; handy for comparing against ground truth."""
        out: list[BehaviorLabel] = []
        for seg in self.segments:
            out.extend([seg.label] * len(seg.interval))
        return out


@dataclass(frozen=True)
class LabeledPeriod:
    """A hand-labeled maneuver interval used as classifier training data."""

    trajectory_id: str
    interval: TimeInterval
    label: BehaviorLabel

    def __post_init__(self) -> None:
        if not is_poi_label(self.label):
            raise ValueError(f"{self.label.value} is not a trainable class")


@dataclass(frozen=True)
class ClassifyConfig:
    """Knobs for endpoint detection plus the speed rule."""

    frame_len: int = 20
    hop: int = 10
    mode: str = "adaptive"        # or "determinative"
    t2_frac: float = 0.30
    t1_frac: float = 0.25         # fraction of t2 in both modes
    accel_limit: float = 1.25
    adaptive_on_accel: bool = False
    min_poi_frames: int = 2
    merge_gap_frames: int = 2
    v_stop: float = 0.5
    stop_hold: float = 2.0

    def __post_init__(self) -> None:
        if self.mode not in ("adaptive", "determinative"):
            raise ValueError(f"unknown detection mode {self.mode!r}")
        if self.v_stop < 0 or self.stop_hold < 0:
            raise ValueError("v_stop and stop_hold must be non-negative")

    def frame_config(self) -> EnergyFrameConfig:
        return EnergyFrameConfig(frame_len=self.frame_len, hop=self.hop)


def merge_intervals(intervals) -> list[TimeInterval]:
    """Union of sample intervals; overlapping or adjacent ones coalesce."""
    ivs = sorted(intervals, key=lambda iv: (iv.start_idx, iv.end_idx))
    out: list[TimeInterval] = []
    for iv in ivs:
        if out and iv.start_idx <= out[-1].end_idx + 1:
            if iv.end_idx > out[-1].end_idx:
                out[-1] = TimeInterval(out[-1].start_idx, iv.end_idx)
        else:
            out.append(TimeInterval(iv.start_idx, iv.end_idx))
    return out


def detect_axis_pois(traj: Trajectory, axis: str, cfg: ClassifyConfig) -> list[Poi]:
    """Bi-threshold detection on one axis; a zero-energy axis is just quiet."""
    signal = traj.ax if axis == "x" else traj.ay
    fc = cfg.frame_config()
    energy = short_time_energy(signal, fc, axis=axis)
    # cfg.t1_frac is the energy ratio t1/t2 in every mode; the library
    # functions want fractions of the max (energy or |a|), so convert.
    try:
        if cfg.mode == "determinative":
            th = determinative_threshold(cfg.accel_limit, fc, t1_frac=cfg.t1_frac)
        elif cfg.adaptive_on_accel:
            th = adaptive_thresholds_on_accel(
                signal, fc, cfg.t2_frac,
                float(np.sqrt(cfg.t1_frac)) * cfg.t2_frac, axis=axis)
        else:
            th = adaptive_thresholds(energy, cfg.t2_frac,
                                     cfg.t1_frac * cfg.t2_frac)
    except AllZeroEnergy:
        return []
    return detect_pois(energy, th, min_poi_frames=cfg.min_poi_frames,
                       merge_gap_frames=cfg.merge_gap_frames)


def _stopping_mask(traj: Trajectory, v_stop: float, stop_hold: float) -> np.ndarray:
    """True where speed < v_stop has held for at least stop_hold seconds.

    A run of k consecutive low-speed samples represents k / accel_hz seconds
    of data, so the rule is k >= stop_hold * accel_hz.
    """
    low = traj.speed < v_stop
    min_run = int(np.ceil(stop_hold * traj.accel_hz))
    if min_run <= 1:
        return low
    mask = np.zeros(len(traj), dtype=bool)
    edges = np.diff(np.concatenate([[0], low.astype(np.int8), [0]]))
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        if b - a >= min_run:
            mask[a:b] = True
    return mask


def combine_schemes(traj: Trajectory, pois_x, pois_y, v_stop: float = 0.5,
                    stop_hold: float = 2.0) -> tuple[list[TimeInterval], list[Segment]]:
    """Union the two axis schemes and rule-label everything in between.

    Returns (combined POI intervals, rule segments); together they partition
    [0, len(traj) - 1].
    """
    n = len(traj)
    combined = merge_intervals(
        [p.interval for p in pois_x] + [p.interval for p in pois_y])
    for iv in combined:
        if iv.end_idx >= n:
            raise ValueError(f"POI {iv} exceeds trajectory length {n}")
    stopping = _stopping_mask(traj, v_stop, stop_hold)

    rule: list[Segment] = []

    def fill_gap(lo: int, hi: int) -> None:
        # maximal runs of one rule label inside the gap [lo, hi]
        start = lo
        for i in range(lo + 1, hi + 2):
            if i > hi or stopping[i] != stopping[start]:
                label = BehaviorLabel.STOPPING if stopping[start] else BehaviorLabel.LC
                rule.append(Segment(TimeInterval(start, i - 1), label, "rule"))
                start = i

    cursor = 0
    for iv in combined:
        if iv.start_idx > cursor:
            fill_gap(cursor, iv.start_idx - 1)
        cursor = iv.end_idx + 1
    if cursor < n:
        fill_gap(cursor, n - 1)
    return combined, rule


def classify_timeline(traj: Trajectory, model: SvmModel,
                      cfg: ClassifyConfig | None = None) -> SegmentTimeline:
    """Detect, combine, and label: the per-trajectory analysis pipeline."""
    cfg = cfg or ClassifyConfig()
    pois_x = detect_axis_pois(traj, "x", cfg)
    pois_y = detect_axis_pois(traj, "y", cfg)
    poi_ivs, rule_segments = combine_schemes(
        traj, pois_x, pois_y, v_stop=cfg.v_stop, stop_hold=cfg.stop_hold)
    segments = list(rule_segments)
    if poi_ivs:
        feats = np.vstack([extract_features(traj, iv).as_array() for iv in poi_ivs])
        for iv, label in zip(poi_ivs, model.predict(feats)):
            segments.append(Segment(iv, label, "svm"))
    segments.sort(key=lambda s: s.interval.start_idx)
    return SegmentTimeline(trajectory_id=traj.id, n_samples=len(traj),
                           segments=segments)


# ---------------------------------------------------------------------------
# CSV formats: POIs, timelines, labeled training periods

POI_COLUMNS = ("trajectory_id", "axis", "start_idx", "end_idx", "peak_energy")
TIMELINE_COLUMNS = ("trajectory_id", "start_idx", "end_idx", "label", "source")
LABELED_COLUMNS = ("trajectory_id", "start_idx", "end_idx", "label")


def write_poi_csv(rows, path) -> int:
    """rows = iterable of (trajectory_id, Poi). Returns row count."""
    lines = [",".join(POI_COLUMNS)]
    for traj_id, poi in rows:
        lines.append(f"{traj_id},{poi.axis},{poi.interval.start_idx},"
                     f"{poi.interval.end_idx},{poi.peak_energy!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(lines) - 1


def write_timeline_csv(timelines, path) -> int:
    lines = [",".join(TIMELINE_COLUMNS)]
    for tl in timelines:
        for seg in tl.segments:
            lines.append(f"{tl.trajectory_id},{seg.interval.start_idx},"
                         f"{seg.interval.end_idx},{seg.label.value},{seg.source}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(lines) - 1


def read_timeline_csv(path) -> list[SegmentTimeline]:
    """Rebuild timelines; sample counts come from the partition invariant."""
    groups: dict[str, list[Segment]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, TIMELINE_COLUMNS, path)
        for row in reader:
            tid = row["trajectory_id"]
            if tid not in groups:
                groups[tid] = []
                order.append(tid)
            groups[tid].append(Segment(
                TimeInterval(int(row["start_idx"]), int(row["end_idx"])),
                parse_label(row["label"]), row["source"]))
    return [SegmentTimeline(tid, groups[tid][-1].interval.end_idx + 1, groups[tid])
            for tid in order]


def write_labeled_periods(periods, path) -> int:
    lines = [",".join(LABELED_COLUMNS)]
    for p in periods:
        lines.append(f"{p.trajectory_id},{p.interval.start_idx},"
                     f"{p.interval.end_idx},{p.label.value}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(lines) - 1


def read_labeled_periods(path) -> list[LabeledPeriod]:
    out: list[LabeledPeriod] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, LABELED_COLUMNS, path)
        for row in reader:
            out.append(LabeledPeriod(
                row["trajectory_id"],
                TimeInterval(int(row["start_idx"]), int(row["end_idx"])),
                parse_label(row["label"])))
    if not out:
        raise DataError(f"{path}: no labeled periods")
    return out


def _require_columns(fieldnames, required, path) -> None:
    missing = set(required) - set(fieldnames or ())
    if missing:
        raise DataError(f"{path}: missing column(s) {sorted(missing)}")
