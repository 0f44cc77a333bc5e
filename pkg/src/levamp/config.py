"""JSON run configuration: parsing, validation, defaults.

A config file is a single flat JSON object. Physical keys map onto
OscillatorParams fields; run keys control ensemble size and grids.
Unknown keys are a hard error so typos cannot silently fall back to
defaults. Every validation error names the offending key and the
constraint it violated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .params import OscillatorParams, kev_c_to_momentum

# Squeezing beyond this is outside the validated regime: the soft trap
# becomes so weak that static force gradients and anharmonicity, none of
# which are modeled here, dominate the real transfer. Reject rather than
# extrapolate.
R_MAX = 6.0

_PARAM_KEYS = {
    "mass_kg",
    "freq_hz",
    "eta",
    "gamma_qb_hz",
    "n_init",
    "kappa_imp",
    "gamma_fb_hz",
    "pulse_voltage_v",
    "p_zp_kev_c",
}

_RUN_KEY_DEFAULTS: dict[str, Any] = {
    "n_trials": 200,
    "r_grid": (1.0, 2.0, math.sqrt(12.0)),
    "tau_grid_ns": (100.0, 177.827941, 316.227766, 562.341325, 1000.0),
    "readout_periods": 5.0,
    "dt_per_period": 200,
}


class ConfigError(ValueError):
    """Raised for malformed or out-of-range run configuration."""


@dataclass(frozen=True)
class RunConfig:
    params: OscillatorParams = field(default_factory=OscillatorParams)
    n_trials: int = 200
    r_grid: tuple[float, ...] = _RUN_KEY_DEFAULTS["r_grid"]
    tau_grid_ns: tuple[float, ...] = _RUN_KEY_DEFAULTS["tau_grid_ns"]
    readout_periods: float = 5.0
    dt_per_period: int = 200


def _require(cond: bool, key: str, constraint: str, value: Any) -> None:
    if not cond:
        raise ConfigError(f"config key '{key}' must be {constraint}, got {value!r}")


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a parsed JSON object, validating everything."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")
    known = _PARAM_KEYS | set(_RUN_KEY_DEFAULTS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")

    param_kwargs = {}
    for key in _PARAM_KEYS & set(raw):
        value = raw[key]
        if key == "p_zp_kev_c":
            if value is None:
                param_kwargs["p_zp_override"] = None
                continue
            _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                     key, "a number or null", value)
            _require(float(value) > 0.0, key, "> 0 or null", value)
            param_kwargs["p_zp_override"] = kev_c_to_momentum(float(value))
            continue
        _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                 key, "a number", value)
        _require(math.isfinite(float(value)), key, "finite", value)
        param_kwargs[key] = float(value)
    try:
        params = OscillatorParams(**param_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    run = dict(_RUN_KEY_DEFAULTS)
    for key in set(_RUN_KEY_DEFAULTS) & set(raw):
        run[key] = raw[key]

    n_trials = run["n_trials"]
    _require(isinstance(n_trials, int) and not isinstance(n_trials, bool),
             "n_trials", "an integer", n_trials)
    _require(n_trials >= 2, "n_trials", ">= 2", n_trials)

    r_grid = run["r_grid"]
    _require(isinstance(r_grid, (list, tuple)) and len(r_grid) >= 1,
             "r_grid", "a non-empty array", r_grid)
    for r in r_grid:
        _require(isinstance(r, (int, float)) and not isinstance(r, bool),
                 "r_grid", "an array of numbers", r_grid)
        _require(1.0 <= float(r), "r_grid", "entries >= 1", r)
        _require(float(r) <= R_MAX, "r_grid", f"entries <= {R_MAX:g} (validated regime)", r)
    r_grid = tuple(float(r) for r in r_grid)

    tau_grid = run["tau_grid_ns"]
    _require(isinstance(tau_grid, (list, tuple)) and len(tau_grid) >= 1,
             "tau_grid_ns", "a non-empty array", tau_grid)
    for tau in tau_grid:
        _require(isinstance(tau, (int, float)) and not isinstance(tau, bool),
                 "tau_grid_ns", "an array of numbers", tau_grid)
        _require(float(tau) >= 0.0, "tau_grid_ns", "entries >= 0", tau)
    tau_grid = tuple(float(t) for t in tau_grid)

    readout_periods = run["readout_periods"]
    _require(isinstance(readout_periods, (int, float)) and not isinstance(readout_periods, bool),
             "readout_periods", "a number", readout_periods)
    _require(float(readout_periods) >= 1.0, "readout_periods", ">= 1", readout_periods)

    dt_per_period = run["dt_per_period"]
    _require(isinstance(dt_per_period, int) and not isinstance(dt_per_period, bool),
             "dt_per_period", "an integer", dt_per_period)
    _require(dt_per_period >= 50, "dt_per_period", ">= 50", dt_per_period)

    return RunConfig(
        params=params,
        n_trials=n_trials,
        r_grid=r_grid,
        tau_grid_ns=tau_grid,
        readout_periods=float(readout_periods),
        dt_per_period=dt_per_period,
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Load a RunConfig from a JSON file; None gives all defaults."""
    if path is None:
        return RunConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
