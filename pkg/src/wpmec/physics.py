"""Channel, energy-harvesting, computation and energy formulas.

All functions are pure and broadcast over numpy arrays.  Positions are
horizontal ``(x, y)`` pairs; UAVs fly at ``cfg.uav_altitude`` and devices, APs
and the laser emitter sit on the ground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig

AP_REF_DISTANCE = 1.0  # metres; keeps the AP gain finite at zero distance


class ZeroEnergyError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class EnergyLedger:
    """Per-entity energy terms of one slot (all in joules)."""

    harvested: np.ndarray
    local_compute: np.ndarray
    transmit: np.ndarray
    flight: np.ndarray
    uav_compute: np.ndarray


def _horizontal_sq(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a[..., :2] - b[..., :2]
    return np.sum(diff * diff, axis=-1)


def channel_gain(q_uav, q_dev, cfg: SimConfig) -> np.ndarray:
    """Free-space UAV-device power gain ``ξ0 / (H² + d²)``."""
    return cfg.channel_ref_gain / (cfg.uav_altitude ** 2 + _horizontal_sq(q_uav, q_dev))


def gain_matrix(uav_pos: np.ndarray, dev_pos: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Gains of shape (num_uavs, num_devices)."""
    return channel_gain(uav_pos[:, None, :], dev_pos[None, :, :], cfg)


def virtual_ap_gain(q_dev, ap_positions, cfg: SimConfig) -> np.ndarray:
    """Downlink gain from all APs viewed as one transmitter.

    Each AP contributes ``ξ_ap / (d0² + d²)``; contributions add.
    """
    q = np.asarray(q_dev, dtype=float)
    aps = np.asarray(ap_positions, dtype=float)
    d2 = _horizontal_sq(q[..., None, :], aps)
    return np.sum(cfg.ap_ref_gain / (AP_REF_DISTANCE ** 2 + d2), axis=-1)


def laser_gain_at(distance, cfg: SimConfig) -> np.ndarray:
    d = np.asarray(distance, dtype=float)
    num = cfg.laser_aperture * cfg.laser_optical_eff * np.exp(-cfg.laser_attenuation * d)
    return num / (cfg.laser_beam_size + cfg.laser_divergence * d) ** 2


def laser_distance(q_uav, laser_pos, cfg: SimConfig) -> np.ndarray:
    return np.sqrt(_horizontal_sq(q_uav, laser_pos) + cfg.uav_altitude ** 2)


def laser_gain(q_uav, laser_pos, cfg: SimConfig) -> np.ndarray:
    return laser_gain_at(laser_distance(q_uav, laser_pos, cfg), cfg)


def period_factor(alpha, tau) -> np.ndarray:
    """Fraction of the slot a device spends offloading: ``1 − τ − α + 2ατ``."""
    alpha = np.asarray(alpha, dtype=float)
    return 1.0 - tau - alpha + 2.0 * alpha * tau


def harvest_factor(alpha, tau) -> np.ndarray:
    """Fraction of the slot a device spends harvesting (the complementary period)."""
    alpha = np.asarray(alpha, dtype=float)
    return (1.0 - alpha) * tau + alpha * (1.0 - tau)


def device_harvest(alpha, h_ap, tau, cfg: SimConfig, headroom=None) -> np.ndarray:
    e = cfg.device_harvest_eff * np.asarray(h_ap, dtype=float) * cfg.ap_tx_power \
        * harvest_factor(alpha, tau) * cfg.slot_duration
    if headroom is not None:
        e = np.minimum(e, np.maximum(headroom, 0.0))
    return e


def offload_rate(h, cfg: SimConfig, tx_power=None) -> np.ndarray:
    """Uplink rate in bit/s, ``B log2(1 + P h / δ²)``."""
    p = cfg.device_tx_power if tx_power is None else tx_power
    return cfg.bandwidth * np.log2(1.0 + p * np.asarray(h, dtype=float) / cfg.noise_power)


def local_bits(cfg: SimConfig) -> float:
    return cfg.device_cpu * cfg.slot_duration / cfg.cycles_per_bit


def local_energy(cfg: SimConfig) -> float:
    return cfg.chip_coeff_device * cfg.device_cpu ** 3 * cfg.slot_duration


def device_bits(alpha, tau, h_best, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Local and offloaded bits of a device in one slot.

    ``h_best`` is the gain to the serving UAV; ``None`` or NaN means no serving
    UAV exists and nothing is offloaded.
    """
    if h_best is None:
        shape = np.broadcast_shapes(np.shape(alpha), np.shape(tau))
        return np.full(shape, local_bits(cfg)), np.zeros(shape)
    h = np.asarray(h_best, dtype=float)
    served = np.isfinite(h)
    rate = np.where(served, offload_rate(np.where(served, h, 0.0), cfg), 0.0)
    off = period_factor(alpha, tau) * rate * cfg.slot_duration
    return np.full(off.shape, local_bits(cfg)), off


def device_energy(alpha, tau, cfg: SimConfig, served=True) -> tuple[np.ndarray, np.ndarray]:
    """Local-compute and transmit energy of a device in one slot."""
    tx = np.where(served, period_factor(alpha, tau) * cfg.slot_duration * cfg.device_tx_power, 0.0)
    return np.full(tx.shape, local_energy(cfg)), tx


def uav_harvest(beta, g, cfg: SimConfig, headroom=None) -> np.ndarray:
    e = cfg.uav_harvest_eff * (1.0 - np.asarray(beta, dtype=float)) * np.asarray(g, dtype=float) \
        * cfg.laser_tx_power * cfg.slot_duration
    if headroom is not None:
        e = np.minimum(e, np.maximum(headroom, 0.0))
    return e


def flight_power(speed, cfg: SimConfig) -> np.ndarray:
    v = np.maximum(np.asarray(speed, dtype=float), cfg.min_speed_clamp)
    return cfg.flight_coeff1 * v ** 3 + cfg.flight_coeff2 / v


def uav_compute_energy(cfg: SimConfig) -> float:
    return cfg.chip_coeff_uav * cfg.uav_cpu ** 3 * cfg.slot_duration


def uav_energy(beta, speed, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Flight and compute energy of a UAV in one slot.

    Speeds below ``min_speed_clamp`` are priced at the clamp: the fixed-wing
    propulsion model diverges at zero airspeed.
    """
    flight = cfg.slot_duration * flight_power(speed, cfg)
    compute = np.asarray(beta, dtype=float) * uav_compute_energy(cfg)
    return flight, compute


def slot_efficiency(bits, device_energy, uav_energy) -> float:
    """Total computed bits per joule of total system energy."""
    total = float(np.sum(device_energy)) + float(np.sum(uav_energy))
    if total <= 0:
        raise ZeroEnergyError("slot consumed no energy; efficiency undefined")
    return float(np.sum(bits)) / total


def assign_best_uav(gains: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Serving UAV index per device, or -1 when no UAV is serving.

    ``gains`` has shape (num_uavs, num_devices).  Ties go to the lowest index.
    """
    g = np.where(np.asarray(beta, dtype=bool)[:, None], gains, -np.inf)
    best = np.argmax(g, axis=0)
    none = ~np.any(np.asarray(beta, dtype=bool))
    if none:
        return np.full(gains.shape[1], -1, dtype=np.int64)
    return best.astype(np.int64)


def serving_gain(gains: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Gain to the serving UAV per device; NaN where none serves."""
    idx = assign_best_uav(gains, beta)
    out = np.full(gains.shape[1], np.nan)
    ok = idx >= 0
    out[ok] = gains[idx[ok], np.nonzero(ok)[0]]
    return out
