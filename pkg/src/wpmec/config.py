"""Simulation configuration.

Every scalar used anywhere in the simulator lives on :class:`SimConfig`.  Values
follow the usual UAV-assisted WPMEC simulation table (1 s slots, 1 MHz bandwidth,
0.1 W device uplink, 500 MHz / 2.5 GHz CPUs, 60 W APs, 200 W laser, ...); the
remaining constants (noise power, chip coefficients, laser optics, flight
coefficients) are modelling choices and are documented next to each field.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


@dataclass(frozen=True)
class SimConfig:
    # geometry / population
    area_side: float = 1000.0
    num_devices: int = 40
    num_uavs: int = 4
    num_aps: int = 4
    block_size: float = 100.0

    # slot and radio
    slot_duration: float = 1.0
    bandwidth: float = 1e6
    noise_power: float = 1e-9
    channel_ref_gain: float = 1e-3
    ap_ref_gain: float = 62.5

    # devices
    device_tx_power: float = 0.1
    device_cpu: float = 5e8
    cycles_per_bit: float = 50.0
    chip_coeff_device: float = 1e-28
    device_harvest_eff: float = 0.5
    device_max_speed: float = 5.56
    turn_probs: tuple[float, float, float] = (0.5, 0.25, 0.25)  # straight, left, right
    device_init_factor: float = 5.0  # initial battery, in units of the scheduling threshold
    device_cap_factor: float = 10.0  # battery capacity, same units

    # UAVs
    uav_cpu: float = 2.5e9
    chip_coeff_uav: float = 1e-28
    uav_harvest_eff: float = 0.8
    uav_altitude: float = 10.0
    flight_coeff1: float = 1e-3
    flight_coeff2: float = 40.0
    min_speed_clamp: float = 0.1
    uav_init_energy: float = 500.0
    uav_capacity: float = 1000.0
    speed_levels: tuple[float, ...] = (5.0, 10.0)

    # energy sources
    ap_tx_power: float = 60.0
    laser_tx_power: float = 200.0
    laser_aperture: float = 1.0
    laser_optical_eff: float = 1.0
    laser_attenuation: float = 1e-4
    laser_beam_size: float = 0.1
    laser_divergence: float = 1e-3

    # time allocation
    tau_epsilon: float = 1e-4

    # learning
    discount: float = 0.95
    distill_weight: float = 0.5
    inverse_temperature: float = 1.0
    penalty: float = 10.0
    batch_size: int = 128
    learning_rate: float = 1e-3
    hidden_sizes: tuple[int, ...] = (128, 128)
    episodes: int = 200
    slots_per_episode: int = 50
    replay_capacity: int = 20_000
    target_sync: int = 100
    explore_start: float = 0.3
    explore_end: float = 0.01
    explore_fraction: float = 1.0 / 3.0
    joint_obs: bool = True
    reward_mode: str = "incremental"

    # alternating optimisation
    psi_beta: float = 1e-3
    psi_position: float = 1.0
    psi_tau: float = 1e-3
    max_inner_iters: int = 10

    rng_seed: int = 0

    def replace(self, **changes: Any) -> "SimConfig":
        return validate_config(dataclasses.replace(self, **changes))

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_TUPLE_FIELDS = {f.name for f in dataclasses.fields(SimConfig) if "tuple" in str(f.type)}
FIELD_NAMES = tuple(f.name for f in dataclasses.fields(SimConfig))

_POSITIVE = (
    "area_side", "block_size", "slot_duration", "bandwidth", "noise_power",
    "channel_ref_gain", "ap_ref_gain", "device_tx_power", "device_cpu",
    "cycles_per_bit", "chip_coeff_device", "device_max_speed", "device_init_factor",
    "device_cap_factor", "uav_cpu", "chip_coeff_uav", "uav_altitude",
    "flight_coeff1", "flight_coeff2", "min_speed_clamp", "uav_capacity",
    "ap_tx_power", "laser_tx_power", "laser_aperture", "laser_optical_eff",
    "laser_beam_size", "learning_rate", "inverse_temperature",
)
_OPEN_UNIT = ("device_harvest_eff", "uav_harvest_eff", "discount")
_AT_LEAST_ONE = ("num_devices", "num_uavs", "num_aps", "batch_size", "episodes",
                 "slots_per_episode", "replay_capacity", "target_sync", "max_inner_iters")


def _coerce(raw: Mapping[str, Any]) -> SimConfig:
    unknown = sorted(set(raw) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {k: (tuple(v) if k in _TUPLE_FIELDS else v) for k, v in raw.items()}
    return SimConfig(**kwargs)


def validate_config(cfg: SimConfig | Mapping[str, Any]) -> SimConfig:
    """Check every invariant and return a :class:`SimConfig`.

    A mapping is accepted too; absent keys take their defaults and unknown keys
    are rejected.  The first violated invariant is named in the error.
    """
    if not isinstance(cfg, SimConfig):
        cfg = _coerce(cfg)

    for name in _AT_LEAST_ONE:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"{name} must be ≥ 1 (got {value!r})")
    for name in _POSITIVE:
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigError(f"{name} must be a finite positive number (got {value!r})")
    for name in _OPEN_UNIT:
        value = getattr(cfg, name)
        if not 0.0 < value < 1.0:
            raise ConfigError(f"{name} out of (0,1) (got {value!r})")
    if not 0.0 < cfg.tau_epsilon < 0.5:
        raise ConfigError(f"tau_epsilon out of (0, 0.5) (got {cfg.tau_epsilon!r})")
    if not 0.0 <= cfg.distill_weight <= 1.0:
        raise ConfigError(f"distill_weight out of [0,1] (got {cfg.distill_weight!r})")
    for name in ("laser_attenuation", "laser_divergence", "penalty", "uav_init_energy"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be ≥ 0 (got {getattr(cfg, name)!r})")
    if cfg.uav_init_energy > cfg.uav_capacity:
        raise ConfigError("uav_init_energy exceeds uav_capacity")
    if cfg.device_init_factor > cfg.device_cap_factor:
        raise ConfigError("device_init_factor exceeds device_cap_factor")
    if len(cfg.turn_probs) != 3 or any(p < 0 for p in cfg.turn_probs) or not math.isclose(sum(cfg.turn_probs), 1.0):
        raise ConfigError("turn_probs must be three non-negative numbers summing to 1")
    if not cfg.speed_levels or any(v <= 0 for v in cfg.speed_levels):
        raise ConfigError("speed_levels must be a non-empty list of positive speeds")
    if not cfg.hidden_sizes or any(int(h) < 1 for h in cfg.hidden_sizes):
        raise ConfigError("hidden_sizes must be a non-empty list of positive widths")
    if cfg.block_size > cfg.area_side:
        raise ConfigError("block_size larger than area_side")
    if cfg.reward_mode not in ("incremental", "cumulative"):
        raise ConfigError(f"reward_mode must be 'incremental' or 'cumulative' (got {cfg.reward_mode!r})")
    if not 0.0 <= cfg.explore_end <= cfg.explore_start <= 1.0:
        raise ConfigError("need 0 ≤ explore_end ≤ explore_start ≤ 1")
    if not 0.0 < cfg.explore_fraction <= 1.0:
        raise ConfigError("explore_fraction out of (0,1]")
    for name in ("psi_beta", "psi_position", "psi_tau"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be ≥ 0")
    return cfg


def load_config(path: str | Path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return validate_config(raw)


def desk_config(**overrides: Any) -> SimConfig:
    """The small setting used for quick experiments: 2 UAVs, 10 devices, 4 APs."""
    base = dict(num_uavs=2, num_devices=10, num_aps=4, episodes=200, slots_per_episode=50)
    base.update(overrides)
    return validate_config(base)


JSON_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "wpmec SimConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        f.name: (
            {"type": "array", "items": {"type": "number"}}
            if f.name in _TUPLE_FIELDS
            else {"type": {"bool": "boolean", "int": "integer", "str": "string"}.get(
                str(f.type), "number")}
        )
        for f in dataclasses.fields(SimConfig)
    },
}
