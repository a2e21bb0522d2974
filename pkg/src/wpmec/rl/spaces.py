"""Discrete UAV actions and flat observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import SimConfig
from ..world import WorldState, device_capacity

_COMPASS = {
    "N": (0.0, 1.0), "S": (0.0, -1.0), "E": (1.0, 0.0), "W": (-1.0, 0.0),
    "NE": (1.0, 1.0), "NW": (-1.0, 1.0), "SE": (1.0, -1.0), "SW": (-1.0, -1.0),
}


@dataclass(frozen=True)
class ActionSpace:
    """Enumerated ``(β, heading, speed)`` triples; speed 0 means stay in place."""

    beta: np.ndarray
    direction: np.ndarray  # unit vectors, zero for "stay"
    speed: np.ndarray
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.beta)

    def decode(self, actions, uav_pos: np.ndarray, cfg: SimConfig):
        """β flags, next positions (clamped to the area) and airspeeds for each UAV."""
        a = np.asarray(actions, dtype=np.int64)
        step = self.direction[a] * (self.speed[a] * cfg.slot_duration)[:, None]
        pos = np.clip(np.asarray(uav_pos, dtype=float) + step, 0.0, cfg.area_side)
        return self.beta[a].copy(), pos, self.speed[a].copy()


def build_action_space(cfg: SimConfig) -> ActionSpace:
    beta, direction, speed, labels = [], [], [], []
    for b in (0, 1):
        beta.append(b)
        direction.append((0.0, 0.0))
        speed.append(0.0)
        labels.append(f"b{b}-stay")
        for name, (dx, dy) in _COMPASS.items():
            norm = np.hypot(dx, dy)
            for v in cfg.speed_levels:
                beta.append(b)
                direction.append((dx / norm, dy / norm))
                speed.append(float(v))
                labels.append(f"b{b}-{name}-{v:g}")
    return ActionSpace(np.array(beta, dtype=np.int64), np.array(direction), np.array(speed), tuple(labels))


def obs_dim(cfg: SimConfig) -> int:
    extra = 4 * (cfg.num_uavs - 1) if cfg.joint_obs else 0
    return 3 + 3 * cfg.num_devices + extra


def observe(world: WorldState, u: int, cfg: SimConfig) -> np.ndarray:
    """UAV ``u``'s view: own position and battery, every device's position and
    battery, and (with ``joint_obs``) the other UAVs' position, battery and role.
    All entries are scaled into [0, 1].
    """
    side = cfg.area_side
    parts = [world.uav_pos[u] / side, [world.uav_energy[u] / cfg.uav_capacity]]
    dev = np.column_stack([world.device_pos / side, world.device_energy / device_capacity(cfg)])
    parts.append(dev.ravel())
    if cfg.joint_obs:
        for k in range(world.num_uavs):
            if k == u:
                continue
            parts.append(world.uav_pos[k] / side)
            parts.append([world.uav_energy[k] / cfg.uav_capacity, float(world.beta[k])])
    return np.clip(np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts]), 0.0, 1.0)


def observe_all(world: WorldState, cfg: SimConfig) -> np.ndarray:
    return np.stack([observe(world, u, cfg) for u in range(world.num_uavs)])
