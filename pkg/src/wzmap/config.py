"""Flat key=value configuration with section prefixes.

One file configures the whole pipeline (``segment.frame_len=20``,
``kde.radius=15`` and so on). Unknown keys are rejected with a spelling
suggestion; values are validated against the owning module's preconditions
and reported as diagnostics rather than one-at-a-time failures.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from pathlib import Path

from .classify import ClassifyConfig
from .errors import ConfigError, UnreadableFile
from .kde import KdeConfig
from .labels import parse_label
from .trajectory import CsvSchema


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _label(text: str) -> str:
    return parse_label(text).value


def _auto_float(text: str):
    return None if text.strip().lower() == "auto" else float(text)


def _any(value) -> bool:
    return True


@dataclass(frozen=True)
class _Key:
    default: str
    parse: object
    rule: str
    check: object = _any


def _choice(*opts: str):
    def parse(text: str) -> str:
        if text not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return text
    return parse

KEYS: dict[str, _Key] = {
    "ingest.accel_hz": _Key("20.0", float, "> 0", lambda v: v > 0),
    "ingest.gps_hz": _Key("1.0", float, "> 0", lambda v: v > 0),
    "ingest.aligned": _Key("false", _bool, "boolean"),
    "ingest.col_time": _Key("time", str, "non-empty", bool),
    "ingest.col_lat": _Key("lat", str, "non-empty", bool),
    "ingest.col_lon": _Key("lon", str, "non-empty", bool),
    "ingest.col_speed": _Key("speed", str, "non-empty", bool),
    "ingest.col_ax": _Key("ax", str, "non-empty", bool),
    "ingest.col_ay": _Key("ay", str, "non-empty", bool),
    "ingest.col_az": _Key("az", str, "non-empty", bool),
    "segment.frame_len": _Key("20", int, ">= 1", lambda v: v >= 1),
    "segment.hop": _Key("10", int, ">= 1", lambda v: v >= 1),
    "segment.mode": _Key("adaptive", _choice("adaptive", "determinative"),
                         "adaptive or determinative"),
    "segment.t2_frac": _Key("0.3", float, "in (0, 1]", lambda v: 0 < v <= 1),
    "segment.t1_frac": _Key("0.25", float, "in (0, 1] (fraction of t2)",
                            lambda v: 0 < v <= 1),
    "segment.accel_limit": _Key("1.25", float, "> 0", lambda v: v > 0),
    "segment.adaptive_on_accel": _Key("false", _bool, "boolean"),
    "segment.min_poi_frames": _Key("2", int, ">= 1", lambda v: v >= 1),
    "segment.merge_gap_frames": _Key("2", int, ">= 0", lambda v: v >= 0),
    "combine.v_stop": _Key("0.5", float, ">= 0", lambda v: v >= 0),
    "combine.stop_hold": _Key("2.0", float, ">= 0", lambda v: v >= 0),
    "svm.c": _Key("1.0", float, "> 0", lambda v: v > 0),
    "svm.gamma": _Key("4.0", float, "> 0", lambda v: v > 0),
    "svm.tol": _Key("0.001", float, "> 0", lambda v: v > 0),
    "svm.max_iter": _Key("100000", int, ">= 1", lambda v: v >= 1),
    "svm.grid": _Key("false", _bool, "boolean"),
    "svm.folds": _Key("5", int, ">= 2", lambda v: v >= 2),
    "svm.seed": _Key("0", int, "integer"),
    "kde.cell_size": _Key("2.0", float, "> 0", lambda v: v > 0),
    "kde.radius": _Key("15.0", float, "> 0", lambda v: v > 0),
    "kde.placement": _Key("per_second", _choice("midpoint", "per_second"),
                          "midpoint or per_second"),
    "kde.legend": _Key("per_behavior", _choice("per_behavior", "unified"),
                       "per_behavior or unified"),
    "kde.calibration_label": _Key("LC", _label, "a behavior label"),
    "kde.ref_lat": _Key("auto", _auto_float, "degrees or 'auto'",
                        lambda v: v is None or abs(v) < 85),
    "kde.ref_lon": _Key("auto", _auto_float, "degrees or 'auto'",
                        lambda v: v is None or abs(v) <= 180),
    "paths.input_dir": _Key("", str, "path"),
    "paths.out_dir": _Key("out", str, "non-empty path", bool),
    "paths.model": _Key("", str, "path"),
    "paths.train_labels": _Key("", str, "path"),
    "paths.calibration_points": _Key("", str, "path"),
}

# (rule text, involved keys, predicate over the parsed mapping)
CROSS_RULES = (
    ("segment.hop must be <= segment.frame_len",
     ("segment.hop", "segment.frame_len"),
     lambda v: v["segment.hop"] <= v["segment.frame_len"]),
    ("kde.radius must be >= kde.cell_size (KdeConfig rule)",
     ("kde.radius", "kde.cell_size"),
     lambda v: v["kde.radius"] >= v["kde.cell_size"]),
    ("ingest.gps_hz must be <= ingest.accel_hz",
     ("ingest.gps_hz", "ingest.accel_hz"),
     lambda v: v["ingest.gps_hz"] <= v["ingest.accel_hz"]),
    ("kde.ref_lat and kde.ref_lon must both be 'auto' or both numeric",
     ("kde.ref_lat", "kde.ref_lon"),
     lambda v: (v["kde.ref_lat"] is None) == (v["kde.ref_lon"] is None)),
)


@dataclass(frozen=True)
class Diagnostic:
    key: str
    value: str
    rule: str

    def __str__(self) -> str:
        head = f"{self.key}={self.value}: " if self.value else f"{self.key}: "
        return head + self.rule


def parse_kv_lines(text: str, origin: str = "<config>") -> dict[str, str]:
    """Strict key=value parser; blank lines and # comments are skipped."""
    out: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{origin}:{ln}: expected KEY=VALUE, got {raw!r}")
        if key in out:
            raise ConfigError(f"{origin}:{ln}: duplicate key {key}")
        out[key] = value
    return out


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    return parse_kv_lines(text, origin=str(path))


def _suggest(key: str) -> str:
    pool = list(KEYS) + [k.split(".", 1)[1] for k in KEYS]
    hit = difflib.get_close_matches(key, pool, n=1, cutoff=0.6)
    if not hit:
        return "unknown key"
    full = hit[0] if "." in hit[0] else next(
        k for k in KEYS if k.endswith("." + hit[0]))
    return f"unknown key; did you mean {full!r}?"


def check_mapping(kv: dict[str, str]) -> tuple[dict, list[Diagnostic]]:
    """Parse and validate raw strings; returns (typed values, diagnostics)."""
    values = {}
    diags: list[Diagnostic] = []
    for key, spec in KEYS.items():
        raw = kv.get(key, spec.default)
        try:
            value = spec.parse(raw)
        except ValueError as exc:
            diags.append(Diagnostic(key, raw, str(exc) or f"must be {spec.rule}"))
            value = spec.parse(spec.default)
        else:
            if not spec.check(value):
                diags.append(Diagnostic(key, raw, f"must be {spec.rule}"))
        values[key] = value
    for key in sorted(set(kv) - set(KEYS)):
        diags.append(Diagnostic(key, kv[key], _suggest(key)))
    for rule, keys, ok in CROSS_RULES:
        if not any(d.key in keys for d in diags) and not ok(values):
            diags.append(Diagnostic(keys[0], str(kv.get(keys[0], "")), rule))
    return values, diags


def validate_config(path) -> list[Diagnostic]:
    """All problems in a config file; empty list means it is usable."""
    try:
        kv = parse_kv_file(path)
    except UnreadableFile:
        raise
    except ConfigError as exc:
        return [Diagnostic("<syntax>", "", str(exc))]
    return check_mapping(kv)[1]


@dataclass(frozen=True)
class PipelineConfig:
    """Validated, typed configuration for every pipeline stage."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def classify_config(self) -> ClassifyConfig:
        v = self.values
        return ClassifyConfig(
            frame_len=v["segment.frame_len"], hop=v["segment.hop"],
            mode=v["segment.mode"], t2_frac=v["segment.t2_frac"],
            t1_frac=v["segment.t1_frac"], accel_limit=v["segment.accel_limit"],
            adaptive_on_accel=v["segment.adaptive_on_accel"],
            min_poi_frames=v["segment.min_poi_frames"],
            merge_gap_frames=v["segment.merge_gap_frames"],
            v_stop=v["combine.v_stop"], stop_hold=v["combine.stop_hold"])

    def kde_config(self) -> KdeConfig:
        return KdeConfig(cell_size=self.values["kde.cell_size"],
                         radius=self.values["kde.radius"])

    def csv_schema(self) -> CsvSchema:
        v = self.values
        return CsvSchema(time=v["ingest.col_time"], lat=v["ingest.col_lat"],
                         lon=v["ingest.col_lon"], speed=v["ingest.col_speed"],
                         ax=v["ingest.col_ax"], ay=v["ingest.col_ay"],
                         az=v["ingest.col_az"], aligned=v["ingest.aligned"])

    def snapshot(self) -> dict[str, str]:
        """Canonical string form of every key, for manifests and print-config."""
        out = {}
        for key in sorted(KEYS):
            val = self.values[key]
            if isinstance(val, bool):
                out[key] = "true" if val else "false"
            elif val is None:
                out[key] = "auto"
            else:
                out[key] = str(val)
        return out


def load_config(path=None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """File plus override strings -> validated config; raises on any problem."""
    kv: dict[str, str] = {}
    if path is not None:
        kv.update(parse_kv_file(path))
    if overrides:
        kv.update(overrides)
    values, diags = check_mapping(kv)
    if diags:
        raise ConfigError("; ".join(str(d) for d in diags))
    return PipelineConfig(values=values)


def default_config() -> PipelineConfig:
    return load_config()
