"""Run configuration files with explicit physical units.

A configuration is a YAML or JSON mapping.  Every dimensional value is a
string ``"<number> <unit>"``, e.g. ``"20 kg/s"`` or ``"0.2142 MPa"``, and
is converted to SI on load.  Dimensionless values may be bare numbers.

Example::

    scenario: shutdown_ramp
    parameters:
      kappa: 1
      Fs: 20 kg/s
    options:
      pc_in_floor: 100 Pa
    tolerances:
      newton: 1.0e-9
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .model import MODES
from .params import PARAMETERS, ModelParams, ParameterError, default_params, si_unit
from .scenarios import REGISTRY, KINDS, Sweep, TimedChange, Tolerances


class ConfigError(ValueError):
    """Invalid configuration: unknown field, bad unit or bad value."""


# SI unit -> accepted spellings and their factors to SI
UNITS: dict[str, dict[str, float]] = {
    "1": {"": 1.0, "1": 1.0},
    "K": {"K": 1.0},
    "s": {"s": 1.0, "ms": 1e-3, "min": 60.0, "h": 3600.0},
    "kg/s": {"kg/s": 1.0, "t/h": 1000.0 / 3600.0},
    "W/K": {"W/K": 1.0, "kW/K": 1e3, "MW/K": 1e6},
    "Pa": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "bar": 1e5},
    "J/mol": {"J/mol": 1.0, "kJ/mol": 1e3},
    "J/(K m^3)": {"J/(K m^3)": 1.0, "kJ/(K m^3)": 1e3},
    "J/(K kg)": {"J/(K kg)": 1.0, "kJ/(K kg)": 1e3},
    "m^3": {"m^3": 1.0},
    "m^2/m^3": {"m^2/m^3": 1.0, "1/m": 1.0},
    "mol/m^3": {"mol/m^3": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")

TOP_LEVEL = {
    "scenario", "mode", "parameters", "options", "sweep", "events", "integrate",
    "tolerances", "output",
}


def parse_quantity(value: Any, unit: str, where: str) -> float:
    """Convert ``"<number> <unit>"`` (or a bare number if dimensionless) to SI."""
    if unit not in UNITS:
        raise ConfigError(f"{where}: no unit table for {unit!r}")
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a quantity in {unit}, got {value!r}")
    if isinstance(value, (int, float)):
        if unit != "1":
            raise ConfigError(f"{where}: missing unit, expected a value in {unit}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a quantity in {unit}, got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    number, spelled = float(m.group(1)), " ".join(m.group(2).split())
    factors = UNITS[unit]
    if spelled not in factors:
        raise ConfigError(
            f"{where}: unit {spelled or '(none)'!r} does not match expected unit {unit!r}"
        )
    return number * factors[spelled]


def format_quantity(value: float, unit: str) -> str | float:
    return float(value) if unit == "1" else f"{float(value):.17g} {unit}"


@dataclass
class RunConfig:
    """Validated run settings, all in SI."""

    scenario: str | None = None
    mode: str = "endex"
    parameters: dict[str, float] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)
    sweeps: list[Sweep] = field(default_factory=list)
    events: list[TimedChange] = field(default_factory=list)
    t_end: float = 600.0
    sample_dt: float | None = 1.0
    initial_state: tuple[float, ...] | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: str | None = None

    @property
    def params(self) -> ModelParams:
        return default_params().with_values(**self.parameters)

    def to_dict(self) -> dict[str, Any]:
        """Mapping that :func:`load_config` turns back into an equal config."""
        out: dict[str, Any] = {"mode": self.mode}
        if self.scenario is not None:
            out["scenario"] = self.scenario
        out["parameters"] = {
            k: format_quantity(v, si_unit(k)) for k, v in self.params.as_flat_dict().items()
        }
        if self.options:
            units = REGISTRY[self.scenario].options
            out["options"] = {k: _format_option(v, units[k] or "1") for k, v in self.options.items()}
        if self.sweeps:
            out["sweep"] = [
                {
                    "param": s.param,
                    "range": [format_quantity(s.lo, si_unit(s.param)),
                              format_quantity(s.hi, si_unit(s.param))],
                    "points": s.points,
                    "start": s.start,
                }
                for s in self.sweeps
            ]
        if self.events:
            out["events"] = [
                {"time": format_quantity(e.time, "s"), "param": e.param,
                 "value": format_quantity(e.value, si_unit(e.param))}
                for e in self.events
            ]
        integ: dict[str, Any] = {"t_end": format_quantity(self.t_end, "s")}
        integ["sample_dt"] = None if self.sample_dt is None else format_quantity(self.sample_dt, "s")
        if self.initial_state is not None:
            units = ("mol/m^3", "K", "mol/m^3", "K")
            integ["initial"] = [format_quantity(v, u) for v, u in zip(self.initial_state, units)]
        out["integrate"] = integ
        t = self.tolerances
        out["tolerances"] = {"newton": t.newton, "rtol": t.rtol, "atol": t.atol}
        if self.output is not None:
            out["output"] = {"directory": self.output}
        return out


def _format_option(v, unit):
    if isinstance(v, (list, tuple)):
        return [format_quantity(x, unit) for x in v]
    return format_quantity(v, unit)


def _mapping(value, where) -> Mapping:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    return value


def _check_keys(d: Mapping, allowed: set[str], where: str) -> None:
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown field {where}{k!r}")


def _parse_sweep(d, where) -> Sweep:
    d = _mapping(d, where)
    _check_keys(d, {"param", "range", "points", "start"}, f"{where}.")
    name = d.get("param")
    if name not in PARAMETERS:
        raise ConfigError(f"{where}.param: unknown parameter {name!r}")
    rng = d.get("range")
    if not isinstance(rng, (list, tuple)) or len(rng) != 2:
        raise ConfigError(f"{where}.range: expected [lo, hi]")
    unit = si_unit(name)
    lo, hi = (parse_quantity(v, unit, f"{where}.range") for v in rng)
    try:
        return Sweep(name, lo, hi, int(d.get("points", 200)), d.get("start", "lo"))
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_mapping(raw: Mapping | None) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`."""
    raw = _mapping(raw, "config")
    _check_keys(raw, TOP_LEVEL, "")
    cfg = RunConfig()

    scenario = raw.get("scenario")
    if scenario is not None and scenario not in REGISTRY:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    cfg.scenario = scenario

    mode = raw.get("mode", "endex")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    cfg.mode = mode

    for name, value in _mapping(raw.get("parameters"), "parameters").items():
        if name not in PARAMETERS:
            raise ConfigError(f"unknown field parameters.{name!r}")
        cfg.parameters[name] = parse_quantity(value, si_unit(name), f"parameters.{name}")
        try:
            default_params().with_values(**{name: cfg.parameters[name]})
        except ParameterError as exc:
            raise ConfigError(f"parameters.{name}: {exc}") from None
    try:
        cfg.params
    except ParameterError as exc:
        raise ConfigError(f"parameters: {exc}") from None

    options = _mapping(raw.get("options"), "options")
    if options and scenario is None:
        raise ConfigError("options: only valid together with a scenario")
    for name, value in options.items():
        units = REGISTRY[scenario].options
        if name not in units:
            raise ConfigError(f"unknown field options.{name!r} for scenario {scenario}")
        unit = units[name] or "1"
        where = f"options.{name}"
        if isinstance(value, (list, tuple)):
            cfg.options[name] = tuple(parse_quantity(v, unit, where) for v in value)
        else:
            cfg.options[name] = parse_quantity(value, unit, where)

    sweep = raw.get("sweep")
    if sweep is not None:
        items = sweep if isinstance(sweep, (list, tuple)) else [sweep]
        if not 1 <= len(items) <= 2:
            raise ConfigError("sweep: give one sweep or a pair")
        cfg.sweeps = [_parse_sweep(s, f"sweep[{i}]") for i, s in enumerate(items)]

    for i, ev in enumerate(raw.get("events") or []):
        ev = _mapping(ev, f"events[{i}]")
        _check_keys(ev, {"time", "param", "value"}, f"events[{i}].")
        name = ev.get("param")
        if name not in PARAMETERS:
            raise ConfigError(f"events[{i}].param: unknown parameter {name!r}")
        try:
            cfg.events.append(TimedChange(
                parse_quantity(ev.get("time"), "s", f"events[{i}].time"),
                name,
                parse_quantity(ev.get("value"), si_unit(name), f"events[{i}].value"),
            ))
        except ParameterError as exc:
            raise ConfigError(f"events[{i}]: {exc}") from None

    integ = _mapping(raw.get("integrate"), "integrate")
    _check_keys(integ, {"t_end", "sample_dt", "initial"}, "integrate.")
    if "t_end" in integ:
        cfg.t_end = parse_quantity(integ["t_end"], "s", "integrate.t_end")
    if "sample_dt" in integ:
        dt = integ["sample_dt"]
        cfg.sample_dt = None if dt is None else parse_quantity(dt, "s", "integrate.sample_dt")
    init = integ.get("initial")
    if init is not None and init != "steady":
        units = ("mol/m^3", "K", "mol/m^3", "K")
        if not isinstance(init, (list, tuple)) or len(init) not in (2, 4):
            raise ConfigError("integrate.initial: expected 'steady' or a list of 2 or 4 quantities")
        cfg.initial_state = tuple(
            parse_quantity(v, u, f"integrate.initial[{i}]") for i, (v, u) in enumerate(zip(init, units))
        )

    tol = _mapping(raw.get("tolerances"), "tolerances")
    _check_keys(tol, {"newton", "rtol", "atol"}, "tolerances.")
    try:
        cfg.tolerances = Tolerances(
            **{k: parse_quantity(v, "1", f"tolerances.{k}") for k, v in tol.items()}
        )
    except ParameterError as exc:
        raise ConfigError(f"tolerances: {exc}") from None

    out = _mapping(raw.get("output"), "output")
    _check_keys(out, {"directory"}, "output.")
    if "directory" in out:
        cfg.output = str(out["directory"])
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a YAML or JSON configuration file.

    ``None`` gives the defaults.  A missing file raises ``FileNotFoundError``.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: not valid structured text: {exc}") from None
    return config_from_mapping(raw)


__all__ = [
    "ConfigError",
    "KINDS",
    "RunConfig",
    "UNITS",
    "config_from_mapping",
    "format_quantity",
    "load_config",
    "parse_quantity",
]
