"""Synthetic vehicle-pass generator with exact ground-truth timelines.

A script is a sequence of maneuver steps (label, duration, acceleration
and/or turn radius). The generator integrates point-vehicle kinematics at
the accelerometer clock, ramps setpoints linearly over 0.5 s at step
boundaries to avoid unphysical jerk, and adds seeded Gaussian noise. With
zero noise the speed profile is exact to machine precision: acceleration
setpoints are integrated analytically (midpoint rule on a piecewise-linear
profile whose breakpoints sit on sample ticks).

Conventions: x-axis acceleration is forward-positive, y-axis left-positive,
so left turns produce positive lateral acceleration v^2 / radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import Segment, SegmentTimeline
from .errors import ConfigError, SpeedUnderflow
from .labels import RULE_LABELS, BehaviorLabel, parse_label, speed_trend, turn_sign
from .trajectory import TimeInterval, Trajectory, unproject_local

RAMP_SECONDS = 0.5
MAX_SCRIPT_ACCEL = 5.0
DEFAULT_REF = (31.0, 121.0)  # arbitrary mid-latitude reference for lat/lon output


@dataclass(frozen=True)
class ManeuverStep:
    """One scripted maneuver; accel applies to *A/*D, radius to turns."""

    label: BehaviorLabel
    duration: float
    accel: float | None = None
    radius: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", parse_label(self.label))
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if speed_trend(self.label):
            if self.accel is None or not (0 < self.accel <= MAX_SCRIPT_ACCEL):
                raise ValueError(
                    f"{self.label.value} needs accel in (0, {MAX_SCRIPT_ACCEL}]")
        if turn_sign(self.label):
            if self.radius is None or self.radius <= 0:
                raise ValueError(f"{self.label.value} needs a positive radius")

    @property
    def lon_accel(self) -> float:
        return speed_trend(self.label) * (self.accel or 0.0)

    @property
    def curvature(self) -> float:
        """Signed path curvature 1/radius; left positive."""
        sign = turn_sign(self.label)
        return sign / self.radius if sign else 0.0


@dataclass(frozen=True)
class ManeuverScript:
    steps: tuple[ManeuverStep, ...]
    v0: float
    heading0: float = 0.0
    seed: int = 0
    name: str = "synth"

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("script needs at least one step")
        if self.v0 < 0:
            raise ValueError(f"initial speed must be >= 0, got {self.v0}")

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.steps)


@dataclass(frozen=True)
class NoiseModel:
    accel_sd: float = 0.05
    gps_pos_sd: float = 2.0
    gps_speed_sd: float = 0.2

    def __post_init__(self) -> None:
        if min(self.accel_sd, self.gps_pos_sd, self.gps_speed_sd) < 0:
            raise ValueError("noise standard deviations must be >= 0")


ZERO_NOISE = NoiseModel(0.0, 0.0, 0.0)


def _setpoint_knots(script: ManeuverScript, value) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear profile of a per-step setpoint with boundary ramps.

    Each internal boundary gets a ramp of half-width min(0.25 s, half of
    either neighboring step); the script starts and ends at full setpoint.
    """
    bounds = np.cumsum([s.duration for s in script.steps])
    vals = [value(s) for s in script.steps]
    tk = [0.0]
    vk = [vals[0]]
    for k in range(len(vals) - 1):
        half = min(RAMP_SECONDS / 2, script.steps[k].duration / 2,
                   script.steps[k + 1].duration / 2)
        tk += [bounds[k] - half, bounds[k] + half]
        vk += [vals[k], vals[k + 1]]
    tk.append(bounds[-1])
    vk.append(vals[-1])
    return np.array(tk), np.array(vk)


def generate(script: ManeuverScript, noise: NoiseModel = ZERO_NOISE,
             accel_hz: float = 20.0, gps_hz: float = 1.0,
             ref: tuple[float, float] = DEFAULT_REF,
             ) -> tuple[Trajectory, SegmentTimeline]:
    """Integrate one script; returns the trajectory and its exact timeline."""
    dt = 1.0 / accel_hz
    n = round(script.total_duration * accel_hz)
    if n < 1:
        raise ValueError("script too short for one sample")
    t = np.arange(n) * dt

    ta, va = _setpoint_knots(script, lambda s: s.lon_accel)
    tc, vc = _setpoint_knots(script, lambda s: s.curvature)
    a_lon = np.interp(t, ta, va)
    kappa = np.interp(t, tc, vc)

    # Midpoint evaluation integrates the piecewise-linear profile exactly,
    # because ramp breakpoints land on sample ticks.
    a_mid = np.interp(t + dt / 2, ta, va)
    v = script.v0 + dt * np.concatenate([[0.0], np.cumsum(a_mid[:-1])])
    if v.min() < -1e-9 * max(1.0, script.v0):
        idx = int(np.argmax(v < 0))
        raise SpeedUnderflow(
            f"script {script.name!r} drives speed negative at t={t[idx]:.2f} s")
    v = np.maximum(v, 0.0)

    heading = script.heading0 + dt * np.concatenate(
        [[0.0], np.cumsum((v * kappa)[:-1])])
    x = dt * np.concatenate([[0.0], np.cumsum((v * np.cos(heading))[:-1])])
    y = dt * np.concatenate([[0.0], np.cumsum((v * np.sin(heading))[:-1])])

    rng = np.random.default_rng(script.seed)
    ax = a_lon + rng.normal(0.0, noise.accel_sd, n)
    ay = v * v * kappa + rng.normal(0.0, noise.accel_sd, n)
    az = rng.normal(0.0, noise.accel_sd, n)

    # GPS noise is drawn once per fix (1 Hz) and interpolated, imitating the
    # ingest-side interpolation of noisy fixes; zero sd leaves kinematics exact.
    step = max(1, round(accel_hz / gps_hz))
    fix_t = t[::step]
    x_off = np.interp(t, fix_t, rng.normal(0.0, noise.gps_pos_sd, fix_t.size))
    y_off = np.interp(t, fix_t, rng.normal(0.0, noise.gps_pos_sd, fix_t.size))
    v_off = np.interp(t, fix_t, rng.normal(0.0, noise.gps_speed_sd, fix_t.size))
    lat, lon = unproject_local(np.column_stack([x + x_off, y + y_off]),
                               ref[0], ref[1])

    traj = Trajectory(id=script.name, t=t, lat=lat, lon=lon,
                      speed=np.maximum(v + v_off, 0.0),
                      ax=ax, ay=ay, az=az, accel_hz=accel_hz, gps_hz=gps_hz)

    segments = []
    edges = [0] + [round(b * accel_hz) for b in
                   np.cumsum([s.duration for s in script.steps])]
    edges[-1] = n
    for s, lo, hi in zip(script.steps, edges[:-1], edges[1:]):
        if hi > lo:
            source = "rule" if s.label in RULE_LABELS else "svm"
            segments.append(Segment(TimeInterval(lo, hi - 1), s.label, source))
    return traj, SegmentTimeline(script.name, n, segments)


def generate_fleet(scripts, noise: NoiseModel = ZERO_NOISE,
                   accel_hz: float = 20.0, gps_hz: float = 1.0,
                   ref: tuple[float, float] = DEFAULT_REF) -> list[tuple[Trajectory, SegmentTimeline]]:
    scripts = list(scripts)
    if not scripts:
        raise ValueError("fleet needs at least one script")
    return [generate(s, noise, accel_hz, gps_hz, ref) for s in scripts]


# ---------------------------------------------------------------------------
# scenario files: the key=value config syntax, steps as a compact one-liner


def parse_steps(spec: str) -> tuple[ManeuverStep, ...]:
    """Parse ``LABEL:dur[,a=...][,r=...]`` items separated by ``|``.

    Example: ``LC:10|LD:5,a=1.6|TLC:3,r=200``.
    """
    steps = []
    for item in spec.split("|"):
        item = item.strip()
        if not item:
            raise ConfigError(f"empty step in {spec!r}")
        head, _, rest = item.partition(":")
        if not rest:
            raise ConfigError(f"step {item!r} needs LABEL:duration")
        parts = rest.split(",")
        kwargs = {}
        for p in parts[1:]:
            key, _, val = p.partition("=")
            key = key.strip()
            if key not in ("a", "r") or not val:
                raise ConfigError(f"step {item!r}: expected a=... or r=...")
            kwargs["accel" if key == "a" else "radius"] = float(val)
        try:
            steps.append(ManeuverStep(parse_label(head.strip()),
                                      float(parts[0]), **kwargs))
        except ValueError as exc:
            raise ConfigError(f"step {item!r}: {exc}") from None
    return tuple(steps)


def parse_scenario(path) -> tuple[list[ManeuverScript], NoiseModel,
                                  tuple[float, float]]:
    """Scenario file -> (scripts, noise, projection reference).

    Recognized keys: scenario.steps (required), scenario.v0 (required),
    scenario.heading, scenario.seed, scenario.copies, scenario.name,
    scenario.ref_lat, scenario.ref_lon, noise.accel_sd, noise.gps_pos_sd,
    noise.gps_speed_sd.
    """
    from .config import parse_kv_file
    kv = parse_kv_file(path)
    known = {"scenario.steps", "scenario.v0", "scenario.heading",
             "scenario.seed", "scenario.copies", "scenario.name",
             "scenario.ref_lat", "scenario.ref_lon", "noise.accel_sd",
             "noise.gps_pos_sd", "noise.gps_speed_sd"}
    unknown = set(kv) - known
    if unknown:
        raise ConfigError(f"{path}: unknown scenario key(s) "
                          f"{', '.join(sorted(unknown))}")
    for req in ("scenario.steps", "scenario.v0"):
        if req not in kv:
            raise ConfigError(f"{path}: missing required key {req}")
    try:
        steps = parse_steps(kv["scenario.steps"])
        v0 = float(kv["scenario.v0"])
        heading = float(kv.get("scenario.heading", "0.0"))
        seed = int(kv.get("scenario.seed", "0"))
        copies = int(kv.get("scenario.copies", "1"))
        name = kv.get("scenario.name", "synth")
        ref = (float(kv.get("scenario.ref_lat", str(DEFAULT_REF[0]))),
               float(kv.get("scenario.ref_lon", str(DEFAULT_REF[1]))))
        noise = NoiseModel(
            accel_sd=float(kv.get("noise.accel_sd", "0.05")),
            gps_pos_sd=float(kv.get("noise.gps_pos_sd", "2.0")),
            gps_speed_sd=float(kv.get("noise.gps_speed_sd", "0.2")))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if copies < 1:
        raise ConfigError(f"{path}: scenario.copies must be >= 1")
    width = max(3, len(str(copies - 1)))
    scripts = [ManeuverScript(steps=steps, v0=v0, heading0=heading,
                              seed=seed + i, name=f"{name}-{i:0{width}d}")
               for i in range(copies)]
    return scripts, noise, ref
