"""End-to-end run: ingest -> (train) -> classify -> points -> KDE -> files.

Every artifact is plain text written atomically; the run manifest records
the config snapshot, input digests, and per-stage outputs so a rerun with
identical inputs is byte-identical and diffable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (classify_timeline, read_labeled_periods,
                       write_timeline_csv)
from .config import PipelineConfig
from .errors import ConfigError, DataError
from .features import feature_matrix
from .gridio import write_ascii_grid, write_points_geojson
from .kde import (Calibration, DensityRaster, KdeConfig, build_distribution,
                  calibrate_reference, read_points_csv, segment_to_points,
                  to_percentage, write_points_csv)
from .svm import grid_search, load_model, save_model, train_svm
from .textio import atomic_write_text, sha256_file
from .trajectory import load_trajectories


@dataclass
class RunManifest:
    version: str
    config: dict[str, str]
    inputs: dict[str, str] = field(default_factory=dict)
    stages: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"version": self.version, "config": self.config,
               "inputs": self.inputs, "stages": self.stages}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        atomic_write_text(path, self.to_json())


class _Run:
    """Tracks written files so a failed run can remove partial outputs."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def features_for_periods(trajectories, periods):
    """(feature matrix, labels) for labeled periods against their trajectories."""
    by_id = {tr.id: tr for tr in trajectories}
    rows = []
    labels = []
    for p in periods:
        traj = by_id.get(p.trajectory_id)
        if traj is None:
            raise DataError(f"labeled period references unknown trajectory "
                            f"{p.trajectory_id!r}")
        if p.interval.end_idx >= len(traj):
            raise DataError(f"{p.trajectory_id}: labeled period {p.interval} "
                            f"exceeds {len(traj)} samples")
        rows.append((traj, p.interval))
        labels.append(p.label)
    mat = np.vstack([feature_matrix(tr, [iv]) for tr, iv in rows])
    return mat, labels


def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Execute all stages; on any failure partial outputs are removed."""
    out_dir = Path(config["paths.out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(out_dir)
    manifest = RunManifest(version=__version__, config=config.snapshot())
    stage = "setup"
    try:
        stage = "ingest"
        manifest.stages[stage] = _stage_ingest(config, manifest)
        trajectories = manifest.stages[stage].pop("_trajectories")

        stage = "train"
        manifest.stages[stage] = _stage_train(config, manifest, trajectories, run)
        model = manifest.stages[stage].pop("_model")

        stage = "classify"
        timelines = [classify_timeline(tr, model, config.classify_config())
                     for tr in trajectories]
        rows = write_timeline_csv(timelines, run.path("timelines.csv"))
        manifest.stages[stage] = {"timelines": "timelines.csv", "rows": rows}

        stage = "points"
        ref_lat, ref_lon = config["kde.ref_lat"], config["kde.ref_lon"]
        if ref_lat is None:
            ref_lat = float(trajectories[0].lat[0])
            ref_lon = float(trajectories[0].lon[0])
        points = []
        for tr, tl in zip(trajectories, timelines):
            points.extend(segment_to_points(tr, tl, (ref_lat, ref_lon),
                                            placement=config["kde.placement"]))
        rows = write_points_csv(points, run.path("points.csv"))
        write_points_geojson(points, run.path("points.geojson"),
                             (ref_lat, ref_lon))
        manifest.stages[stage] = {"csv": "points.csv",
                                  "geojson": "points.geojson", "rows": rows,
                                  "ref_lat": ref_lat, "ref_lon": ref_lon}

        stage = "kde"
        manifest.stages[stage] = _stage_kde(config, manifest, points, run)

        manifest.write(out_dir / "manifest.json")
        return manifest
    except Exception as exc:
        run.cleanup()
        ident = manifest.stages.get(stage, {}).get("input", "")
        note = f" ({ident})" if ident else ""
        exc.args = (f"[stage {stage}{note}] {exc}",) + exc.args[1:]
        raise


def _stage_ingest(config: PipelineConfig, manifest: RunManifest) -> dict:
    input_dir = config["paths.input_dir"]
    if not input_dir:
        raise ConfigError("paths.input_dir is required")
    files = sorted(Path(input_dir).glob("*.csv"))
    if not files:
        raise DataError(f"no trajectories in {input_dir}")
    for f in files:
        manifest.inputs[f.name] = sha256_file(f)
    trajectories = load_trajectories(input_dir, config.csv_schema(),
                                     accel_hz=config["ingest.accel_hz"],
                                     gps_hz=config["ingest.gps_hz"])
    return {"trajectories": len(trajectories),
            "samples": sum(len(tr) for tr in trajectories),
            "_trajectories": trajectories}


def _stage_train(config: PipelineConfig, manifest: RunManifest,
                 trajectories, run: _Run) -> dict:
    labels_path = config["paths.train_labels"]
    model_path = config["paths.model"]
    if not labels_path:
        if not model_path:
            raise ConfigError(
                "need paths.model (trained model) or paths.train_labels "
                "(training data)")
        return {"model": model_path, "loaded": True,
                "_model": load_model(model_path)}

    manifest.inputs[Path(labels_path).name] = sha256_file(labels_path)
    periods = read_labeled_periods(labels_path)
    feats, labels = features_for_periods(trajectories, periods)
    info: dict = {"periods": len(periods), "loaded": False}
    c, gamma = config["svm.c"], config["svm.gamma"]
    if config["svm.grid"]:
        result = grid_search(feats, labels, k=config["svm.folds"],
                             seed=config["svm.seed"], tol=config["svm.tol"],
                             max_iter=config["svm.max_iter"])
        c, gamma = result.best_c, result.best_gamma
        info["grid"] = {"c": c, "gamma": gamma,
                        "cv_accuracy": result.best_accuracy}
    model = train_svm(feats, labels, c=c, gamma=gamma, tol=config["svm.tol"],
                      max_iter=config["svm.max_iter"])
    if model_path:
        save_model(model, model_path)
        info["model"] = model_path
    else:
        save_model(model, run.path("model.txt"))
        info["model"] = "model.txt"
    info["pairs"] = len(model.binaries)
    info["_model"] = model
    return info


def _stage_kde(config: PipelineConfig, manifest: RunManifest, points,
               run: _Run) -> dict:
    base = config.kde_config()
    cal_path = config["paths.calibration_points"]
    if cal_path:
        manifest.inputs[Path(cal_path).name] = sha256_file(cal_path)
        cal_points = read_points_csv(cal_path)
        cal = calibrate_reference(cal_points, base)
    else:
        # self-calibration: the chosen label's own points on the shared grid
        label = config["kde.calibration_label"]
        cal_points = [p for p in points if p.label.value == label]
        if not cal_points:
            raise DataError(
                f"no points labeled {label} to calibrate against; set "
                f"kde.calibration_label or paths.calibration_points")
        shared = shared_bounds(points, base)
        cal = calibrate_reference(cal_points, shared)
        base = shared
    dist = build_distribution(points, base, cal,
                              legend_mode=config["kde.legend"])
    rasters: dict[str, dict] = {}
    for lbl in dist.labels():
        raster = dist.rasters[lbl]
        density_name = f"density_{lbl.value}.asc"
        percent_name = f"percent_{lbl.value}.asc"
        write_ascii_grid(raster, run.path(density_name))
        percent = DensityRaster(xll=raster.xll, yll=raster.yll,
                                cell_size=raster.cell_size,
                                values=to_percentage(raster.values,
                                                     dist.calibration))
        write_ascii_grid(percent, run.path(percent_name))
        rasters[lbl.value] = {"density": density_name, "percent": percent_name,
                              "nrows": raster.nrows, "ncols": raster.ncols}
    return {"d_ref": cal.d_ref, "rasters": rasters,
            "legend": config["kde.legend"]}


def shared_bounds(points, base: KdeConfig) -> KdeConfig:
    if base.bounds is not None or not points:
        return base
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    return KdeConfig(cell_size=base.cell_size, radius=base.radius,
                     bounds=(min(xs) - base.radius, min(ys) - base.radius,
                             max(xs) + base.radius, max(ys) + base.radius))
