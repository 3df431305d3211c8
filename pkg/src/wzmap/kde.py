"""Quadratic-kernel density rasterization and percentage calibration.

Each behavior point spreads its weight over a disc of the search radius r
with the compact quadratic kernel (3 / pi r^2) (1 - (d/r)^2)^2, which
integrates to 1 over the plane. Densities are converted to "percentage of
vehicles" by dividing by d_ref, the peak density of a reference road
section where every vehicle exhibits the same behavior.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptyCalibrationSet, MixedLabels
from .labels import ALL_LABELS, BehaviorLabel, parse_label
from .textio import atomic_write_text
from .trajectory import Trajectory, local_project

NODATA = -9999.0


@dataclass(frozen=True)
class BehaviorPoint:
    """One map point carrying a behavior label; x east, y north, meters."""

    x: float
    y: float
    label: BehaviorLabel
    weight: float = 1.0
    trajectory_id: str = ""

    def __post_init__(self) -> None:
        if not (self.weight > 0):
            raise ValueError(f"weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class KdeConfig:
    cell_size: float = 2.0
    radius: float = 15.0
    bounds: tuple[float, float, float, float] | None = None  # xmin, ymin, xmax, ymax

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.radius < self.cell_size:
            raise ValueError(f"radius {self.radius} must be >= cell_size "
                             f"{self.cell_size}")
        if self.bounds is not None:
            xmin, ymin, xmax, ymax = self.bounds
            if not (xmin < xmax and ymin < ymax):
                raise ValueError(f"degenerate bounds {self.bounds}")


@dataclass(frozen=True)
class DensityRaster:
    """Cell-centered density grid; row 0 is the southernmost row."""

    xll: float
    yll: float
    cell_size: float
    values: np.ndarray
    nodata: float = NODATA

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (self.xll + (col + 0.5) * self.cell_size,
                self.yll + (row + 0.5) * self.cell_size)

    def peak(self) -> tuple[float, float, float]:
        """(x, y, value) of the maximum-density cell."""
        row, col = np.unravel_index(int(np.argmax(self.values)),
                                    self.values.shape)
        x, y = self.cell_center(int(row), int(col))
        return x, y, float(self.values[row, col])


@dataclass(frozen=True)
class Calibration:
    d_ref: float

    def __post_init__(self) -> None:
        if not (self.d_ref > 0):
            raise ValueError(f"d_ref must be positive, got {self.d_ref}")


def _grid_geometry(points, config: KdeConfig) -> tuple[float, float, int, int]:
    """(xll, yll, ncols, nrows); auto bounds pad the point box by the radius."""
    if config.bounds is not None:
        xmin, ymin, xmax, ymax = config.bounds
    elif points:
        xs = [p.x for p in points]
        ys = [p.y for p in points]
        xmin, xmax = min(xs) - config.radius, max(xs) + config.radius
        ymin, ymax = min(ys) - config.radius, max(ys) + config.radius
    else:
        xmin, ymin, xmax, ymax = 0.0, 0.0, config.cell_size, config.cell_size
    ncols = max(1, math.ceil((xmax - xmin) / config.cell_size))
    nrows = max(1, math.ceil((ymax - ymin) / config.cell_size))
    return xmin, ymin, ncols, nrows


def kde(points, config: KdeConfig) -> DensityRaster:
    """Sum the quadratic kernel of every point over the cell centers.

    Only cells with center distance d < radius receive a contribution
    (compact support), so each point touches a local window of the grid.
    """
    xll, yll, ncols, nrows = _grid_geometry(points, config)
    values = np.zeros((nrows, ncols))
    cs, r = config.cell_size, config.radius
    r2 = r * r
    norm = 3.0 / (math.pi * r2)
    xc = xll + (np.arange(ncols) + 0.5) * cs
    yc = yll + (np.arange(nrows) + 0.5) * cs
    for p in points:
        c0 = max(0, math.ceil((p.x - r - xll) / cs - 0.5))
        c1 = min(ncols - 1, math.floor((p.x + r - xll) / cs - 0.5))
        r0 = max(0, math.ceil((p.y - r - yll) / cs - 0.5))
        r1 = min(nrows - 1, math.floor((p.y + r - yll) / cs - 0.5))
        if c0 > c1 or r0 > r1:
            continue
        dx = xc[c0:c1 + 1] - p.x
        dy = yc[r0:r1 + 1] - p.y
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        inside = d2 < r2
        window = values[r0:r1 + 1, c0:c1 + 1]
        window[inside] += p.weight * norm * (1.0 - d2[inside] / r2) ** 2
    return DensityRaster(xll=xll, yll=yll, cell_size=cs, values=values)


def calibrate_reference(uniform_points, config: KdeConfig) -> Calibration:
    """Peak density of a single-behavior reference set; defines 100%."""
    pts = list(uniform_points)
    if not pts:
        raise EmptyCalibrationSet("calibration needs at least one point")
    labels = {p.label for p in pts}
    if len(labels) > 1:
        raise MixedLabels(
            "calibration set must be single-labeled, got "
            + ", ".join(sorted(lbl.value for lbl in labels)))
    raster = kde(pts, config)
    d_ref = float(raster.values.max())
    if d_ref <= 0:
        raise EmptyCalibrationSet("calibration points fall outside the grid")
    return Calibration(d_ref=d_ref)


def to_percentage(d, cal: Calibration):
    """Density as a share of d_ref; linear, 100 exactly at d == d_ref."""
    return 100.0 * (np.asarray(d, dtype=float) / cal.d_ref) if np.ndim(d) \
        else 100.0 * (float(d) / cal.d_ref)


@dataclass
class BehaviorDistribution:
    """Per-behavior rasters on one shared grid, plus the calibration."""

    rasters: dict[BehaviorLabel, DensityRaster]
    calibration: Calibration
    legend_mode: str = "per_behavior"  # or "unified"

    def __post_init__(self) -> None:
        if self.legend_mode not in ("per_behavior", "unified"):
            raise ValueError(f"unknown legend mode {self.legend_mode!r}")
        geoms = {(r.xll, r.yll, r.cell_size, r.nrows, r.ncols)
                 for r in self.rasters.values()}
        if len(geoms) > 1:
            raise ValueError("rasters do not share grid geometry")

    def labels(self) -> list[BehaviorLabel]:
        return [lbl for lbl in ALL_LABELS if lbl in self.rasters]

    def legend_ranges(self) -> dict[BehaviorLabel, tuple[float, float]]:
        """Display range per label: independent or shared across labels."""
        per = {lbl: (float(r.values.min()), float(r.values.max()))
               for lbl, r in self.rasters.items()}
        if self.legend_mode == "per_behavior":
            return per
        lo = min(v[0] for v in per.values())
        hi = max(v[1] for v in per.values())
        return {lbl: (lo, hi) for lbl in per}

    def percentage(self, label: BehaviorLabel) -> np.ndarray:
        return to_percentage(self.rasters[label].values, self.calibration)


def build_distribution(points, config: KdeConfig, cal: Calibration,
                       legend_mode: str = "per_behavior") -> BehaviorDistribution:
    """One raster per label present, all on a grid covering every point."""
    pts = list(points)
    if config.bounds is None:
        xll, yll, ncols, nrows = _grid_geometry(pts, config)
        config = KdeConfig(cell_size=config.cell_size, radius=config.radius,
                           bounds=(xll, yll, xll + ncols * config.cell_size,
                                   yll + nrows * config.cell_size))
    rasters: dict[BehaviorLabel, DensityRaster] = {}
    for lbl in ALL_LABELS:
        group = [p for p in pts if p.label == lbl]
        if group:
            rasters[lbl] = kde(group, config)
    return BehaviorDistribution(rasters=rasters, calibration=cal,
                                legend_mode=legend_mode)


# ---------------------------------------------------------------------------
# point generation from classified timelines


def segment_to_points(traj: Trajectory, timeline, ref: tuple[float, float],
                      placement: str = "per_second") -> list[BehaviorPoint]:
    """Emit map points for every segment of one classified trajectory.

    midpoint: one point at the segment's temporal midpoint. per_second: one
    point per represented second (sample count / rate, at least one), spaced
    evenly in time so long segments weigh proportionally to their duration.
    """
    if placement not in ("midpoint", "per_second"):
        raise ValueError(f"unknown placement {placement!r}")
    if timeline.n_samples != len(traj):
        raise DataError(f"timeline for {timeline.trajectory_id} has "
                        f"{timeline.n_samples} samples, trajectory {len(traj)}")
    xy = local_project(traj, ref[0], ref[1])
    x, y = xy[:, 0], xy[:, 1]
    out: list[BehaviorPoint] = []
    for seg in timeline.segments:
        iv = seg.interval
        t0, t1 = traj.t[iv.start_idx], traj.t[iv.end_idx]
        if placement == "midpoint":
            times = np.array([0.5 * (t0 + t1)])
        else:
            span = len(iv) / traj.accel_hz
            n = max(1, math.floor(span))
            times = t0 + (np.arange(n) + 0.5) * (span / n)
        px = np.interp(times, traj.t, x)
        py = np.interp(times, traj.t, y)
        out.extend(BehaviorPoint(float(a), float(b), seg.label,
                                 trajectory_id=traj.id)
                   for a, b in zip(px, py))
    return out


POINT_COLUMNS = ("x", "y", "label", "weight", "trajectory_id")


def write_points_csv(points, path) -> int:
    lines = [",".join(POINT_COLUMNS)]
    for p in points:
        lines.append(f"{p.x!r},{p.y!r},{p.label.value},{p.weight!r},"
                     f"{p.trajectory_id}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return len(lines) - 1


def read_points_csv(path) -> list[BehaviorPoint]:
    out: list[BehaviorPoint] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(POINT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            out.append(BehaviorPoint(
                float(row["x"]), float(row["y"]), parse_label(row["label"]),
                weight=float(row["weight"]),
                trajectory_id=row["trajectory_id"]))
    return out
