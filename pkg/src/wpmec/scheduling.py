"""Residual-energy threshold scheduling of ground devices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .config import SimConfig


def threshold(cfg: SimConfig, chip_coeff=None, cpu=None, tx_power=None):
    """Largest energy a device can spend in one slot: ``(k f³ + P) T``.

    Per-device arrays may be passed for heterogeneous populations.
    """
    k = cfg.chip_coeff_device if chip_coeff is None else np.asarray(chip_coeff, dtype=float)
    f = cfg.device_cpu if cpu is None else np.asarray(cpu, dtype=float)
    p = cfg.device_tx_power if tx_power is None else np.asarray(tx_power, dtype=float)
    return (k * f ** 3 + p) * cfg.slot_duration


def schedule_devices(residual, theta) -> np.ndarray:
    """Type-1 (offload first) iff the residual energy strictly exceeds ``theta``."""
    return (np.asarray(residual, dtype=float) > theta).astype(np.int64)


@dataclass(frozen=True)
class ScheduledQuantities:
    bits: np.ndarray
    energy: np.ndarray
    harvest: np.ndarray


def scheduled_quantities(alpha, tau: float, h_serving, h_ap, cfg: SimConfig) -> ScheduledQuantities:
    """Bits, consumed and harvested energy per device once ``alpha`` is fixed."""
    local, off = physics.device_bits(alpha, tau, h_serving, cfg)
    served = np.isfinite(np.asarray(h_serving, dtype=float))
    e_loc, e_tx = physics.device_energy(alpha, tau, cfg, served=served)
    return ScheduledQuantities(
        bits=local + off,
        energy=e_loc + e_tx,
        harvest=physics.device_harvest(alpha, h_ap, tau, cfg),
    )
