"""Geospatial file formats: ESRI ASCII grid and GeoJSON points.

Both are plain text so any GIS (or diff) can consume the pipeline output.
Writers are deterministic: fixed scientific notation for cell values, repr
for header geometry, sorted keys in JSON.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DataError
from .kde import DensityRaster
from .textio import atomic_write_text
from .trajectory import unproject_local


def render_ascii_grid(raster: DensityRaster) -> str:
    """ESRI ASCII grid text; top row first, 6 significant digits per value."""
    header = (f"ncols {raster.ncols}\n"
              f"nrows {raster.nrows}\n"
              f"xllcorner {raster.xll!r}\n"
              f"yllcorner {raster.yll!r}\n"
              f"cellsize {raster.cell_size!r}\n"
              f"NODATA_value {int(raster.nodata)}\n")
    rows = [" ".join(f"{v:.5e}" for v in row) for row in raster.values[::-1]]
    return header + "\n".join(rows) + "\n"


def write_ascii_grid(raster: DensityRaster, path) -> None:
    atomic_write_text(path, render_ascii_grid(raster))


def read_ascii_grid(path) -> DensityRaster:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header: dict[str, float] = {}
    body_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in (
                "ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
                "nodata_value"):
            header[parts[0].lower()] = float(parts[1])
            body_start = i + 1
        else:
            break
    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise DataError(f"{path}: missing grid header line {key}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    values = np.loadtxt(lines[body_start:], ndmin=2)
    if values.shape != (nrows, ncols):
        raise DataError(f"{path}: grid body is {values.shape}, header says "
                        f"({nrows}, {ncols})")
    return DensityRaster(
        xll=header["xllcorner"], yll=header["yllcorner"],
        cell_size=header["cellsize"], values=values[::-1].copy(),
        nodata=header.get("nodata_value", -9999.0))


def render_points_geojson(points, ref: tuple[float, float]) -> str:
    """FeatureCollection of behavior points, local meters mapped to WGS-84."""
    pts = list(points)
    if pts:
        xy = np.array([[p.x, p.y] for p in pts])
        lat, lon = unproject_local(xy, ref[0], ref[1])
    features = []
    for i, p in enumerate(pts):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [float(lon[i]), float(lat[i])]},
            "properties": {"label": p.label.value,
                           "trajectory_id": p.trajectory_id,
                           "weight": p.weight},
        })
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_points_geojson(points, path, ref: tuple[float, float]) -> None:
    atomic_write_text(path, render_points_geojson(points, ref))
