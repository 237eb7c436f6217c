"""Scenario configuration files.

Scenarios are described in TOML: a [scenario] table plus optional
[y_star], [f_x_star], [vehicle], [mpc], [adhesion_control], [rates]
tables whose keys mirror the corresponding dataclasses, and an
[[adhesion]] array of tables for the rail-condition schedule.
"""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .adhesion import AdhesionConfig
from .harness import ScenarioSpec, SignalSpec
from .integration import RateConfig
from .model import VehicleParams
from .mpc import MpcConfig
from .plant import ADHESION_PRESETS, AdhesionCurveParams
from .track import TrackSpec


class ConfigError(ValueError):
    """Malformed scenario configuration."""


def _build(cls, table: dict, where: str):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - valid
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{where}] table: {exc}") from exc


def _signal(table: dict, where: str) -> SignalSpec:
    return _build(SignalSpec, table, where)


def _adhesion_intervals(entries) -> tuple:
    out = []
    for e in entries:
        start = float(e.get("start", 0.0))
        if "preset" in e:
            name = e["preset"]
            if name not in ADHESION_PRESETS:
                raise ConfigError(f"unknown adhesion preset {name!r}")
            out.append((start, name))
        else:
            pars = {k: v for k, v in e.items() if k != "start"}
            out.append((start, _build(AdhesionCurveParams, pars, "adhesion")))
    return tuple(out)


def load_scenario(path) -> ScenarioSpec:
    """Parse a scenario file into a ScenarioSpec."""
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    sc = dict(doc.get("scenario", {}))
    kwargs = {}
    for key in ("name", "controller", "distance", "max_time", "seed",
                "miss_every_n"):
        if key in sc:
            kwargs[key] = sc.pop(key)
    if "track" in sc:
        kwargs["track_id"] = sc.pop("track")
    if "v0_kmh" in sc:
        kwargs["v0"] = float(sc.pop("v0_kmh")) / 3.6
    elif "v0" in sc:
        kwargs["v0"] = float(sc.pop("v0"))
    if sc:
        raise ConfigError(f"unknown keys in [scenario]: {sorted(sc)}")

    if "track_spec" in doc:
        kwargs["track_spec"] = _build(TrackSpec, doc["track_spec"], "track_spec")
    if "y_star" in doc:
        kwargs["y_star"] = _signal(doc["y_star"], "y_star")
    if "f_x_star" in doc:
        kwargs["f_x_star"] = _signal(doc["f_x_star"], "f_x_star")
    if "adhesion" in doc:
        kwargs["adhesion_intervals"] = _adhesion_intervals(doc["adhesion"])
    if "vehicle" in doc:
        kwargs["params"] = _build(VehicleParams, doc["vehicle"], "vehicle")
    if "mpc" in doc:
        kwargs["mpc"] = _build(MpcConfig, doc["mpc"], "mpc")
    if "adhesion_control" in doc:
        kwargs["adhesion_cfg"] = _build(AdhesionConfig, doc["adhesion_control"],
                                        "adhesion_control")
    if "rates" in doc:
        kwargs["rates"] = _build(RateConfig, doc["rates"], "rates")

    try:
        return ScenarioSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_design_space(path) -> dict:
    """Parse a tuning design space: a [space] table of name = [low, high]."""
    doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    table = doc.get("space", doc)
    space = {}
    for name, bounds in table.items():
        if (not isinstance(bounds, (list, tuple)) or len(bounds) != 2
                or bounds[1] <= bounds[0]):
            raise ConfigError(f"design bound {name} must be [low, high]")
        space[name] = (float(bounds[0]), float(bounds[1]))
    if not space:
        raise ConfigError("empty design space")
    return space
