"""Command-line interface: composable stages plus a one-shot pipeline.

Every subcommand reads the same flat key=value config; dedicated flags
override file values, which override built-in defaults. Exit codes: 0
success, 2 configuration problem, 3 data problem, 4 internal error. The
WZMAP_LOG environment variable (debug|info|warning|error) controls log
verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .classify import (classify_timeline, detect_axis_pois,
                       read_labeled_periods, read_timeline_csv, write_poi_csv,
                       write_timeline_csv)
from .config import (KEYS, PipelineConfig, default_config, load_config,
                     validate_config)
from .errors import ConfigError, DataError, WzmapError
from .gridio import write_ascii_grid, write_points_geojson
from .kde import (DensityRaster, build_distribution, calibrate_reference,
                  read_points_csv, segment_to_points, to_percentage,
                  write_points_csv)
from .pipeline import features_for_periods, run_pipeline, shared_bounds
from .svm import grid_search, load_model, save_model, train_svm
from .synth import generate_fleet, parse_scenario
from .textio import sha256_file
from .trajectory import (load_trajectories, local_project,
                         write_trajectory_csv, write_xy_csv)

log = logging.getLogger("wzmap")


def _add_config_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="FILE", help="key=value config file")
    sub.add_argument("--set", metavar="KEY=VALUE", action="append",
                     default=[], dest="sets",
                     help="override one config key (repeatable)")


def _overrides(args, flag_map: dict[str, str]) -> dict[str, str]:
    """Merge --set pairs and dedicated flags into config overrides."""
    out: dict[str, str] = {}
    for item in args.sets:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = str(value)
    return out


def _config(args, flag_map: dict[str, str] | None = None) -> PipelineConfig:
    return load_config(args.config, _overrides(args, flag_map or {}))


def _load_inputs(config: PipelineConfig, input_dir: str):
    files = sorted(Path(input_dir).glob("*.csv"))
    if not files:
        raise DataError(f"no trajectories in {input_dir}")
    return load_trajectories(input_dir, config.csv_schema(),
                             accel_hz=config["ingest.accel_hz"],
                             gps_hz=config["ingest.gps_hz"])


# --- subcommand handlers ---------------------------------------------------


def _cmd_ingest(args) -> int:
    config = _config(args)
    trajectories = _load_inputs(config, args.input_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ref = None
    for traj in trajectories:
        write_trajectory_csv(traj, out_dir / f"{traj.id}.csv")
        if args.xy:
            if ref is None:
                ref = ((args.ref_lat if args.ref_lat is not None
                        else float(traj.lat[0])),
                       (args.ref_lon if args.ref_lon is not None
                        else float(traj.lon[0])))
            write_xy_csv(local_project(traj, ref[0], ref[1]),
                         out_dir / f"{traj.id}_xy.csv")
    log.info("ingested %d trajectories into %s", len(trajectories), out_dir)
    print(f"ingested {len(trajectories)} trajectories -> {out_dir}")
    return 0


def _cmd_synth(args) -> int:
    scripts, noise, ref = parse_scenario(args.scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fleet = generate_fleet(scripts, noise, ref=ref)
    for traj, _ in fleet:
        write_trajectory_csv(traj, out_dir / f"{traj.id}.csv")
    write_timeline_csv([tl for _, tl in fleet], out_dir / "truth_timelines.csv")
    print(f"generated {len(fleet)} trajectories -> {out_dir}")
    return 0


_SEGMENT_FLAGS = {
    "frame_len": "segment.frame_len", "hop": "segment.hop",
    "mode": "segment.mode", "t2_frac": "segment.t2_frac",
    "t1_frac": "segment.t1_frac", "accel_limit": "segment.accel_limit",
    "min_poi": "segment.min_poi_frames", "merge_gap": "segment.merge_gap_frames",
}


def _cmd_segment(args) -> int:
    config = _config(args, _SEGMENT_FLAGS)
    trajectories = _load_inputs(config, args.input_dir)
    cfg = config.classify_config()
    rows = []
    for traj in trajectories:
        for axis in ("x", "y"):
            rows.extend((traj.id, poi)
                        for poi in detect_axis_pois(traj, axis, cfg))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = write_poi_csv(rows, out)
    print(f"{count} POIs -> {out}")
    return 0


_TRAIN_FLAGS = {"c": "svm.c", "gamma": "svm.gamma", "folds": "svm.folds",
                "seed": "svm.seed"}


def _cmd_train(args) -> int:
    config = _config(args, _TRAIN_FLAGS)
    trajectories = _load_inputs(config, args.input_dir)
    periods = read_labeled_periods(args.labels)
    feats, labels = features_for_periods(trajectories, periods)
    c, gamma = config["svm.c"], config["svm.gamma"]
    if args.grid or config["svm.grid"]:
        result = grid_search(feats, labels, k=config["svm.folds"],
                             seed=config["svm.seed"], tol=config["svm.tol"],
                             max_iter=config["svm.max_iter"])
        c, gamma = result.best_c, result.best_gamma
        print(f"grid search: c={c:g} gamma={gamma:g} "
              f"cv_accuracy={result.best_accuracy:.3f}")
    model = train_svm(feats, labels, c=c, gamma=gamma, tol=config["svm.tol"],
                      max_iter=config["svm.max_iter"])
    Path(args.model).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.model)
    print(f"trained on {len(periods)} periods -> {args.model}")
    return 0


def _cmd_classify(args) -> int:
    config = _config(args)
    trajectories = _load_inputs(config, args.input_dir)
    model = load_model(args.model)
    timelines = [classify_timeline(tr, model, config.classify_config())
                 for tr in trajectories]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = write_timeline_csv(timelines, out)
    print(f"{rows} segments -> {out}")
    return 0


_KDE_FLAGS = {"cell_size": "kde.cell_size", "radius": "kde.radius",
              "placement": "kde.placement"}


def _cmd_kde(args) -> int:
    if args.legend is not None:
        args.sets.append("kde.legend=" +
                         ("per_behavior" if args.legend == "per" else args.legend))
    config = _config(args, _KDE_FLAGS)
    trajectories = _load_inputs(config, args.input_dir)
    timelines = {tl.trajectory_id: tl for tl in read_timeline_csv(args.timelines)}
    ref_lat, ref_lon = config["kde.ref_lat"], config["kde.ref_lon"]
    if ref_lat is None:
        ref_lat = float(trajectories[0].lat[0])
        ref_lon = float(trajectories[0].lon[0])
    points = []
    for traj in trajectories:
        if traj.id not in timelines:
            raise DataError(f"no timeline for trajectory {traj.id!r} "
                            f"in {args.timelines}")
        points.extend(segment_to_points(traj, timelines[traj.id],
                                        (ref_lat, ref_lon),
                                        placement=config["kde.placement"]))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_points_csv(points, out_dir / "points.csv")
    write_points_geojson(points, out_dir / "points.geojson", (ref_lat, ref_lon))

    base = config.kde_config()
    if args.calibration_file:
        cal = calibrate_reference(read_points_csv(args.calibration_file), base)
    else:
        label = config["kde.calibration_label"]
        cal_points = [p for p in points if p.label.value == label]
        if not cal_points:
            raise DataError(f"no points labeled {label} to calibrate against")
        base = shared_bounds(points, base)
        cal = calibrate_reference(cal_points, base)
    dist = build_distribution(points, base, cal,
                              legend_mode=config["kde.legend"])
    for lbl in dist.labels():
        raster = dist.rasters[lbl]
        write_ascii_grid(raster, out_dir / f"density_{lbl.value}.asc")
        write_ascii_grid(
            DensityRaster(xll=raster.xll, yll=raster.yll,
                          cell_size=raster.cell_size,
                          values=to_percentage(raster.values, cal)),
            out_dir / f"percent_{lbl.value}.asc")
    print(f"{len(dist.rasters)} behavior rasters (d_ref={cal.d_ref:.6g}) "
          f"-> {out_dir}")
    return 0


def _cmd_pipeline(args) -> int:
    config = _config(args, {"input_dir": "paths.input_dir",
                            "out_dir": "paths.out_dir",
                            "model": "paths.model",
                            "train_labels": "paths.train_labels"})
    manifest = run_pipeline(config)
    out_dir = Path(config["paths.out_dir"])
    print(f"pipeline complete -> {out_dir / 'manifest.json'}")
    for stage in ("ingest", "train", "classify", "points", "kde"):
        info = {k: v for k, v in manifest.stages[stage].items()
                if not isinstance(v, dict)}
        print(f"  {stage}: " + ", ".join(f"{k}={v}" for k, v in sorted(info.items())))
    return 0


def _cmd_validate_config(args) -> int:
    diags = validate_config(args.path)
    for d in diags:
        print(str(d))
    if diags:
        print(f"{len(diags)} problem(s) in {args.path}")
        return 2
    print(f"{args.path}: OK")
    return 0


def _cmd_print_config(args) -> int:
    config = _config(args) if (args.config or args.sets) else default_config()
    for key, value in config.snapshot().items():
        print(f"{key}={value}")
    return 0


def _cmd_checksum(args) -> int:
    for path in args.paths:
        print(f"{sha256_file(path)}  {path}")
    return 0


# --- parser wiring -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wzmap",
        description="Vehicle behavior density maps for work zones")
    parser.add_argument("--version", action="version",
                        version=f"wzmap {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="align raw CSVs onto the accel clock")
    p.add_argument("input_dir")
    p.add_argument("--out-dir", default="out/aligned")
    p.add_argument("--xy", action="store_true",
                   help="also write projected x,y CSVs")
    p.add_argument("--ref-lat", type=float)
    p.add_argument("--ref-lon", type=float)
    _add_config_options(p)
    p.set_defaults(func=_cmd_ingest)

    p = subs.add_parser("synth", help="generate synthetic trajectories")
    p.add_argument("scenario", help="scenario key=value file")
    p.add_argument("--out-dir", default="out/synth")
    p.set_defaults(func=_cmd_synth, sets=[], config=None)

    p = subs.add_parser("segment", help="detect maneuver periods per axis")
    p.add_argument("input_dir")
    p.add_argument("--out", default="out/pois.csv")
    p.add_argument("--frame-len", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--mode", choices=["adaptive", "determinative"])
    p.add_argument("--t2-frac", type=float)
    p.add_argument("--t1-frac", type=float,
                   help="lower threshold as a fraction of t2")
    p.add_argument("--accel-limit", type=float)
    p.add_argument("--min-poi", type=int)
    p.add_argument("--merge-gap", type=int)
    _add_config_options(p)
    p.set_defaults(func=_cmd_segment)

    p = subs.add_parser("train", help="train the behavior classifier")
    p.add_argument("--input-dir", required=True,
                   help="directory of trajectory CSVs")
    p.add_argument("--labels", required=True, help="labeled periods CSV")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--grid", action="store_true",
                   help="grid-search c/gamma by cross-validation")
    p.add_argument("--c", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    _add_config_options(p)
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("classify", help="segment + label trajectories")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="out/timelines.csv")
    _add_config_options(p)
    p.set_defaults(func=_cmd_classify)

    p = subs.add_parser("kde", help="rasterize behavior densities")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--timelines", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--cell-size", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--placement", choices=["midpoint", "per_second"])
    p.add_argument("--calibration-file", help="points CSV defining 100%%")
    p.add_argument("--legend", choices=["per", "unified"])
    _add_config_options(p)
    p.set_defaults(func=_cmd_kde)

    p = subs.add_parser("pipeline", help="run all stages")
    p.add_argument("--input-dir")
    p.add_argument("--out-dir")
    p.add_argument("--model")
    p.add_argument("--train-labels")
    _add_config_options(p)
    p.set_defaults(func=_cmd_pipeline)

    p = subs.add_parser("validate-config", help="check a config file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_validate_config)

    p = subs.add_parser("print-config", help="show the effective config")
    _add_config_options(p)
    p.set_defaults(func=_cmd_print_config)

    p = subs.add_parser("checksum", help="sha256 of artifact files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=_cmd_checksum)

    return parser


def main(argv=None) -> int:
    level = {"debug": logging.DEBUG, "info": logging.INFO,
             "warning": logging.WARNING, "error": logging.ERROR}.get(
        os.environ.get("WZMAP_LOG", "warning").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except WzmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - last-resort guard
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
