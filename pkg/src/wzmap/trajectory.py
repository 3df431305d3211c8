"""Trajectory data model, CSV ingestion, and local metric projection.

A trajectory is one vehicle pass: a uniform-rate accelerometer stream
(default 20 Hz) with GPS-derived fields (lat/lon/speed, nominally 1 Hz)
resampled onto the accelerometer clock. Two CSV layouts are accepted:

* raw dual-rate - one row per accelerometer sample, GPS cells blank except
  on rows carrying a fix; lat/lon/speed are linearly interpolated between
  fixes and held at the nearest fix beyond the first/last one;
* aligned - every row already carries GPS values on the accel clock
  (the layout this module writes back out).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import EmptyFile, MissingColumn, NonMonotonicTime, OutOfRangeValue
from .textio import atomic_write_text

EARTH_RADIUS_M = 6_371_000.0

#: Sanity bound on any acceleration component (about 5 g); values beyond it
#: almost certainly indicate unit errors in the input.
ACCEL_SANITY_LIMIT = 50.0

#: Allowed relative deviation of sample spacing from 1/accel_hz.
JITTER_TOLERANCE = 0.10

TRAJECTORY_COLUMNS = ("time", "lat", "lon", "speed", "ax", "ay", "az")


@dataclass(frozen=True)
class TrajectorySample:
    """One time-aligned sample of the fused GPS + accelerometer stream."""

    t: float        # seconds since trajectory start
    lat: float      # degrees WGS-84
    lon: float      # degrees WGS-84
    speed: float    # m/s, >= 0
    ax: float       # m/s^2 longitudinal (forward positive)
    ay: float       # m/s^2 lateral (left positive)
    az: float       # m/s^2 vertical


@dataclass(frozen=True)
class TimeInterval:
    """Closed range of sample indices [start_idx, end_idx]."""

    start_idx: int
    end_idx: int

    def __post_init__(self) -> None:
        if not (0 <= self.start_idx <= self.end_idx):
            raise ValueError(
                f"invalid interval [{self.start_idx}, {self.end_idx}]")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx + 1

    def slice(self) -> slice:
        return slice(self.start_idx, self.end_idx + 1)

    def contains(self, idx: int) -> bool:
        return self.start_idx <= idx <= self.end_idx


@dataclass
class Trajectory:
    """One vehicle pass; arrays share length and live on the accel clock.

    Arrays are locked read-only after validation, so instances are safe to
    share across threads.
    """

    id: str
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    speed: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    accel_hz: float = 20.0
    gps_hz: float = 1.0

    def __post_init__(self) -> None:
        for name in ("t", "lat", "lon", "speed", "ax", "ay", "az"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
        n = self.t.size
        if n == 0:
            raise EmptyFile(f"trajectory {self.id!r} has no samples")
        for name in ("lat", "lon", "speed", "ax", "ay", "az"):
            if getattr(self, name).size != n:
                raise OutOfRangeValue(
                    f"trajectory {self.id!r}: field {name} length mismatch")
        if self.t[0] < 0:
            raise NonMonotonicTime(f"trajectory {self.id!r}: negative start time")
        if n > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                row = int(np.argmax(dt <= 0)) + 1
                raise NonMonotonicTime(
                    f"trajectory {self.id!r}: time not strictly increasing at sample {row}")
            nominal = 1.0 / self.accel_hz
            if np.any(np.abs(dt - nominal) > JITTER_TOLERANCE * nominal):
                raise OutOfRangeValue(
                    f"trajectory {self.id!r}: sample spacing deviates more than "
                    f"{JITTER_TOLERANCE:.0%} from 1/{self.accel_hz:g} s")
        _check_bounds(self.id, self.lat, self.lon, self.speed,
                      self.ax, self.ay, self.az)
        for name in ("t", "lat", "lon", "speed", "ax", "ay", "az"):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def duration(self) -> float:
        """Covered time span in seconds (sample count / rate)."""
        return len(self) / self.accel_hz

    def sample(self, i: int) -> TrajectorySample:
        return TrajectorySample(
            t=float(self.t[i]), lat=float(self.lat[i]), lon=float(self.lon[i]),
            speed=float(self.speed[i]), ax=float(self.ax[i]),
            ay=float(self.ay[i]), az=float(self.az[i]))


def _check_bounds(traj_id, lat, lon, speed, ax, ay, az) -> None:
    checks = (
        ("lat", lat, -90.0, 90.0),
        ("lon", lon, -180.0, 180.0),
        ("speed", speed, 0.0, np.inf),
        ("ax", ax, -ACCEL_SANITY_LIMIT, ACCEL_SANITY_LIMIT),
        ("ay", ay, -ACCEL_SANITY_LIMIT, ACCEL_SANITY_LIMIT),
        ("az", az, -ACCEL_SANITY_LIMIT, ACCEL_SANITY_LIMIT),
    )
    for name, arr, lo, hi in checks:
        if arr.size == 0:
            continue
        if not np.all(np.isfinite(arr)):
            raise OutOfRangeValue(f"trajectory {traj_id!r}: non-finite {name} value")
        if np.any(arr < lo) or np.any(arr > hi):
            bad = arr[(arr < lo) | (arr > hi)][0]
            raise OutOfRangeValue(
                f"trajectory {traj_id!r}: {name}={bad:g} outside [{lo:g}, {hi:g}]")


# --- CSV schema and ingestion -------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for trajectory CSV files.

    ``aligned=False`` (raw dual-rate) treats blank GPS cells as "no fix on
    this row"; ``aligned=True`` requires every cell filled.
    """

    time: str = "time"
    lat: str = "lat"
    lon: str = "lon"
    speed: str = "speed"
    ax: str = "ax"
    ay: str = "ay"
    az: str = "az"
    aligned: bool = False

    def columns(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in TRAJECTORY_COLUMNS}


def _parse_time(raw: str, path, row: int) -> float:
    """Accept epoch seconds (float) or ISO-8601; returns epoch-ish seconds."""
    text = raw.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise OutOfRangeValue(
            f"{path}: row {row}: unparseable time {raw!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _parse_float(raw: str, path, row: int, col: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise OutOfRangeValue(
            f"{path}: row {row}: unparseable {col} value {raw!r}") from None
    if not math.isfinite(value):
        raise OutOfRangeValue(f"{path}: row {row}: non-finite {col} value")
    return value


def ingest_csv(path,
               schema: CsvSchema | None = None,
               accel_hz: float = 20.0,
               gps_hz: float = 1.0,
               traj_id: str | None = None) -> Trajectory:
    """Read one trajectory CSV and align GPS fields onto the accel clock.

    lat/lon/speed are linearly interpolated between GPS fixes; samples before
    the first or after the last fix hold that fix's values. Times become
    seconds since the first sample.
    """
    if accel_hz < gps_hz:
        raise OutOfRangeValue(f"accel_hz {accel_hz:g} < gps_hz {gps_hz:g}")
    schema = schema or CsvSchema()
    path = Path(path)
    if traj_id is None:
        traj_id = path.stem

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{path}: no header row")
        header = set(reader.fieldnames)
        for field_name, col in schema.columns().items():
            if col not in header:
                raise MissingColumn(f"{path}: missing column {col!r} ({field_name})")
        rows = list(reader)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")

    n = len(rows)
    t = np.empty(n)
    accel = {k: np.empty(n) for k in ("ax", "ay", "az")}
    fix_rows: list[int] = []
    fix_vals: dict[str, list[float]] = {"lat": [], "lon": [], "speed": []}

    for i, row in enumerate(rows):
        rownum = i + 2  # header is row 1
        t[i] = _parse_time(row[schema.time], path, rownum)
        for k in ("ax", "ay", "az"):
            accel[k][i] = _parse_float(row[getattr(schema, k)], path, rownum, k)
        gps_cells = {k: (row[getattr(schema, k)] or "").strip()
                     for k in ("lat", "lon", "speed")}
        blank = [k for k, v in gps_cells.items() if v == ""]
        if schema.aligned and blank:
            raise OutOfRangeValue(
                f"{path}: row {rownum}: blank {blank[0]} cell in aligned file")
        if not blank:
            fix_rows.append(i)
            for k in ("lat", "lon", "speed"):
                fix_vals[k].append(_parse_float(gps_cells[k], path, rownum, k))
        elif len(blank) < 3:
            raise OutOfRangeValue(
                f"{path}: row {rownum}: partial GPS fix (blank {blank[0]})")

    if np.any(np.diff(t) <= 0):
        row = int(np.argmax(np.diff(t) <= 0)) + 2
        raise NonMonotonicTime(f"{path}: time decreases or repeats at row {row + 1}")
    t = t - t[0]

    if not fix_rows:
        raise MissingColumn(f"{path}: no GPS fixes found in any row")
    t_fix = t[np.array(fix_rows)]
    gps = {}
    for k in ("lat", "lon", "speed"):
        vals = np.asarray(fix_vals[k])
        # np.interp holds the boundary value outside [t_fix[0], t_fix[-1]]
        gps[k] = vals[0] * np.ones(n) if len(fix_rows) == 1 else np.interp(t, t_fix, vals)

    return Trajectory(
        id=traj_id, t=t, lat=gps["lat"], lon=gps["lon"], speed=gps["speed"],
        ax=accel["ax"], ay=accel["ay"], az=accel["az"],
        accel_hz=accel_hz, gps_hz=gps_hz)


def write_trajectory_csv(traj: Trajectory, path) -> int:
    """Write the aligned CSV layout; float repr makes re-ingestion exact.

    Returns the number of data rows written.
    """
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for i in range(len(traj)):
        lines.append(",".join(repr(float(v)) for v in (
            traj.t[i], traj.lat[i], traj.lon[i], traj.speed[i],
            traj.ax[i], traj.ay[i], traj.az[i])))
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(traj)


def load_trajectories(directory, schema: CsvSchema | None = None,
                      accel_hz: float = 20.0, gps_hz: float = 1.0) -> list[Trajectory]:
    """Ingest every ``*.csv`` under ``directory``, sorted by filename."""
    files = sorted(Path(directory).glob("*.csv"))
    return [ingest_csv(f, schema, accel_hz, gps_hz) for f in files]


# --- local metric projection ---------------------------------------------------

def local_project(traj: Trajectory, ref_lat: float, ref_lon: float) -> np.ndarray:
    """Project lat/lon to local east/north meters about a reference point.

    Equirectangular tangent-plane projection; adequate for work zones a few
    kilometers across. Returns an (n, 2) array of (x east, y north).
    """
    return project_latlon(traj.lat, traj.lon, ref_lat, ref_lon)


def project_latlon(lat, lon, ref_lat: float, ref_lon: float) -> np.ndarray:
    if abs(ref_lat) >= 85.0:
        raise OutOfRangeValue(f"projection reference latitude {ref_lat:g} too close to a pole")
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    scale = math.pi / 180.0 * EARTH_RADIUS_M
    x = (lon - ref_lon) * scale * math.cos(math.radians(ref_lat))
    y = (lat - ref_lat) * scale
    return np.column_stack([x, y])


def unproject_local(xy, ref_lat: float, ref_lon: float) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`project_latlon`; returns (lat, lon) arrays."""
    if abs(ref_lat) >= 85.0:
        raise OutOfRangeValue(f"projection reference latitude {ref_lat:g} too close to a pole")
    xy = np.asarray(xy, dtype=float)
    scale = math.pi / 180.0 * EARTH_RADIUS_M
    lat = ref_lat + xy[:, 1] / scale
    lon = ref_lon + xy[:, 0] / (scale * math.cos(math.radians(ref_lat)))
    return lat, lon


def write_xy_csv(xy: np.ndarray, path) -> int:
    """Projected coordinates as CSV, six decimal places (micrometer scale)."""
    lines = ["x,y"]
    lines += [f"{x:.6f},{y:.6f}" for x, y in xy]
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(xy)
