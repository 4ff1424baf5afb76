"""Strict JSON scenario/experiment configuration.

One document with top-level keys ``bs``, ``trajectory``, ``clock``,
``schedule``, ``noise``, ``seed``, ``trials`` and ``experiment``; every
key is optional (defaults come from the selected experiment) and unknown
keys are rejected so sweep typos fail loudly.

Example::

    {
      "bs": {"positions": [[0, 0], [30, 0], [30, 30], [0, 30]]},
      "trajectory": {"kind": "random-placement", "center": [15, 15],
                     "half_side": 5.0, "speed": 5.0},
      "clock": {"offset_m": 30.0, "drift_ppm": 5.0},
      "schedule": {"slot_interval": 0.01, "bs_order": [0, 1, 2, 3],
                   "start_time": 0.0, "m_per_fix": 8},
      "noise": {"sigma": 0.1},
      "seed": 20260808,
      "trials": 1000,
      "experiment": {"name": "speed-sweep", "grid": [0.1, 1, 5, 10, 20],
                     "estimators": ["kvd", "d"], "prior_std": 2.0}
    }
"""

from __future__ import annotations

import json
from dataclasses import replace

from .errors import ConfigError
from .experiments import DEFAULT_SEED, default_scenario, default_spec
from .model import BsConstellation
from .simulate import (
    Circular,
    ClockModel,
    ConstantVelocity,
    RandomPlacement,
    ScenarioConfig,
    Stationary,
    TdmaSchedule,
)

# Only place in the package where the propagation speed appears: converting
# an oscillator drift given in ppm into range-rate units.
SPEED_OF_LIGHT_M_S = 299792458.0

_TOP_KEYS = {"bs", "trajectory", "clock", "schedule", "noise", "seed",
             "trials", "experiment"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def load_config(path) -> dict:
    """Read and structurally validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    return raw


def _trajectory_from(section: dict):
    kind = section.get("kind")
    if kind == "stationary":
        _check_keys(section, {"kind", "position"}, "trajectory")
        return Stationary(p0=section["position"])
    if kind == "constant-velocity":
        _check_keys(section, {"kind", "position", "velocity", "t_ref"},
                    "trajectory")
        return ConstantVelocity(p0=section["position"],
                                v=section["velocity"],
                                t_ref=float(section.get("t_ref", 0.0)))
    if kind == "circular":
        _check_keys(section, {"kind", "center", "radius", "angular_rate",
                              "speed", "phase"}, "trajectory")
        if ("angular_rate" in section) == ("speed" in section):
            raise ConfigError(
                "circular trajectory needs exactly one of angular_rate/speed")
        radius = float(section["radius"])
        rate = (float(section["angular_rate"]) if "angular_rate" in section
                else float(section["speed"]) / radius)
        return Circular(center=section["center"], radius=radius,
                        angular_rate=rate,
                        phase=float(section.get("phase", 0.0)))
    if kind == "random-placement":
        _check_keys(section, {"kind", "center", "half_side", "speed",
                              "t_ref"}, "trajectory")
        return RandomPlacement(center=section["center"],
                               half_side=float(section["half_side"]),
                               speed=float(section["speed"]),
                               t_ref=float(section.get("t_ref", 0.0)))
    raise ConfigError(f"unknown trajectory kind {kind!r}")


def _clock_from(section: dict) -> ClockModel:
    _check_keys(section, {"offset_m", "drift_ppm", "drift_mps", "t_ref"},
                "clock")
    if ("drift_ppm" in section) and ("drift_mps" in section):
        raise ConfigError("give drift as ppm or m/s, not both")
    if "drift_ppm" in section:
        drift = float(section["drift_ppm"]) * 1e-6 * SPEED_OF_LIGHT_M_S
    elif "drift_mps" in section:
        drift = float(section["drift_mps"])
    else:
        raise ConfigError("clock section needs drift_ppm or drift_mps")
    return ClockModel(b0=float(section.get("offset_m", 0.0)), d=drift,
                      t_ref=float(section.get("t_ref", 0.0)))


def scenario_from_config(raw: dict, experiment: str | None = None,
                         seed: int | None = None,
                         trials: int | None = None):
    """Resolve a config document into (ScenarioConfig, ExperimentSpec).

    Precedence: experiment defaults, then config-file sections, then the
    explicit ``seed``/``trials`` arguments (the CLI flags).
    """
    name = experiment
    exp_section = raw.get("experiment", {})
    if not isinstance(exp_section, dict):
        raise ConfigError("experiment section must be an object")
    _check_keys(exp_section, {"name", "grid", "estimators", "prior_std",
                              "duration_s"}, "experiment")
    if name is None:
        name = exp_section.get("name")
    if name is not None and "name" in exp_section \
            and exp_section["name"] != name:
        raise ConfigError(
            f"config names experiment {exp_section['name']!r}, "
            f"got {name!r} on the command line")

    cfg = default_scenario(name, seed=DEFAULT_SEED if seed is None else seed)

    if "bs" in raw:
        _check_keys(raw["bs"], {"positions"}, "bs")
        cfg = replace(cfg, bs=BsConstellation(raw["bs"]["positions"]))
    if "trajectory" in raw:
        cfg = replace(cfg, trajectory=_trajectory_from(raw["trajectory"]))
    if "clock" in raw:
        cfg = replace(cfg, clock=_clock_from(raw["clock"]))
    if "schedule" in raw:
        sched = raw["schedule"]
        _check_keys(sched, {"slot_interval", "bs_order", "start_time",
                            "m_per_fix", "epoch_slot_offset"}, "schedule")
        base = cfg.schedule
        cfg = replace(
            cfg,
            schedule=TdmaSchedule(
                bs_order=tuple(sched.get("bs_order", base.bs_order)),
                slot_interval=float(sched.get("slot_interval",
                                              base.slot_interval)),
                start_time=float(sched.get("start_time", base.start_time))),
            m_per_fix=int(sched.get("m_per_fix", cfg.m_per_fix)),
            epoch_slot_offset=int(sched.get("epoch_slot_offset",
                                            cfg.epoch_slot_offset)))
    if "noise" in raw:
        _check_keys(raw["noise"], {"sigma"}, "noise")
        cfg = replace(cfg, sigma=raw["noise"]["sigma"])
    if "seed" in raw:
        cfg = replace(cfg, seed=int(raw["seed"]))
    if "trials" in raw:
        cfg = replace(cfg, n_trials=int(raw["trials"]))
    if "duration_s" in exp_section:
        window = cfg.m_per_fix * cfg.schedule.slot_interval
        cfg = replace(cfg, n_trials=int(round(
            float(exp_section["duration_s"]) / window)))

    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if trials is not None:
        cfg = replace(cfg, n_trials=int(trials))

    spec = None
    if name is not None:
        overrides = {}
        if "grid" in exp_section:
            overrides["grid"] = tuple(exp_section["grid"])
        if "estimators" in exp_section:
            overrides["estimators"] = tuple(exp_section["estimators"])
        if "prior_std" in exp_section:
            overrides["prior_std"] = float(exp_section["prior_std"])
        spec = default_spec(name, **overrides)
    return cfg, spec
