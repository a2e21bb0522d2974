"""World state container, initialisation and (de)serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .mobility import StreetGrid, random_positions
from .scheduling import threshold


@dataclass
class WorldState:
    """Positions, batteries and scheduling flags of every node at one slot.

    Device and UAV positions are horizontal ``(x, y)``; UAVs are always at
    ``altitude`` (see :attr:`uav_xyz`).  ``uav_speed`` is the airspeed flown in
    the most recent slot and ``tau`` the last applied time split.
    """

    slot: int
    device_pos: np.ndarray
    device_heading: np.ndarray
    device_energy: np.ndarray
    alpha: np.ndarray
    uav_pos: np.ndarray
    uav_energy: np.ndarray
    beta: np.ndarray
    uav_speed: np.ndarray
    ap_pos: np.ndarray
    laser_pos: np.ndarray
    altitude: float
    tau: float = 0.5
    extras: dict = field(default_factory=dict)

    @property
    def num_devices(self) -> int:
        return len(self.device_pos)

    @property
    def num_uavs(self) -> int:
        return len(self.uav_pos)

    @property
    def uav_xyz(self) -> np.ndarray:
        return np.column_stack([self.uav_pos, np.full(len(self.uav_pos), self.altitude)])

    @property
    def device_xyz(self) -> np.ndarray:
        return np.column_stack([self.device_pos, np.zeros(len(self.device_pos))])

    def copy(self) -> "WorldState":
        return WorldState(
            slot=self.slot,
            device_pos=self.device_pos.copy(),
            device_heading=self.device_heading.copy(),
            device_energy=self.device_energy.copy(),
            alpha=self.alpha.copy(),
            uav_pos=self.uav_pos.copy(),
            uav_energy=self.uav_energy.copy(),
            beta=self.beta.copy(),
            uav_speed=self.uav_speed.copy(),
            ap_pos=self.ap_pos.copy(),
            laser_pos=self.laser_pos.copy(),
            altitude=self.altitude,
            tau=self.tau,
            extras=dict(self.extras),
        )

    def to_dict(self) -> dict:
        return {
            "slot": int(self.slot),
            "altitude": float(self.altitude),
            "tau": float(self.tau),
            "device_pos": self.device_pos.tolist(),
            "device_heading": self.device_heading.tolist(),
            "device_energy": self.device_energy.tolist(),
            "alpha": self.alpha.tolist(),
            "uav_pos": self.uav_pos.tolist(),
            "uav_energy": self.uav_energy.tolist(),
            "beta": self.beta.tolist(),
            "uav_speed": self.uav_speed.tolist(),
            "ap_pos": self.ap_pos.tolist(),
            "laser_pos": self.laser_pos.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        return cls(
            slot=int(d["slot"]),
            device_pos=np.asarray(d["device_pos"], dtype=float).reshape(-1, 2),
            device_heading=np.asarray(d["device_heading"], dtype=np.int64),
            device_energy=np.asarray(d["device_energy"], dtype=float),
            alpha=np.asarray(d["alpha"], dtype=np.int64),
            uav_pos=np.asarray(d["uav_pos"], dtype=float).reshape(-1, 2),
            uav_energy=np.asarray(d["uav_energy"], dtype=float),
            beta=np.asarray(d["beta"], dtype=np.int64),
            uav_speed=np.asarray(d["uav_speed"], dtype=float),
            ap_pos=np.asarray(d["ap_pos"], dtype=float).reshape(-1, 2),
            laser_pos=np.asarray(d["laser_pos"], dtype=float),
            altitude=float(d["altitude"]),
            tau=float(d["tau"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "WorldState":
        return cls.from_dict(json.loads(text))


# Up to nine APs are drawn in this order from the 3×3 lattice at quarter points,
# so adding APs never moves existing ones: quadrant centres first (diagonal
# pairs first), then the area centre, then the edge midpoints.
_NESTED_AP_ORDER = ((1, 1), (3, 3), (1, 3), (3, 1), (2, 2), (2, 1), (2, 3), (1, 2), (3, 2))


def ap_grid(num_aps: int, area_side: float) -> np.ndarray:
    """Spread APs uniformly over the area.

    A single AP sits at the centre.  Two to nine APs are nested subsets of the
    quarter-point lattice, so 4 APs land at the centres of the four quadrants
    and 9 form the full 3×3 lattice.  Larger counts use ``ceil(sqrt(n))``
    columns with every row centred in its band.
    """
    if num_aps == 1:
        return np.array([[area_side / 2.0, area_side / 2.0]])
    if num_aps <= len(_NESTED_AP_ORDER):
        return np.array([(i * area_side / 4.0, j * area_side / 4.0)
                         for i, j in _NESTED_AP_ORDER[:num_aps]], dtype=float)
    cols = math.ceil(math.sqrt(num_aps))
    rows = math.ceil(num_aps / cols)
    out = []
    left = num_aps
    for r in range(rows):
        k = min(cols, left)
        y = (r + 0.5) * area_side / rows
        for c in range(k):
            out.append(((c + 0.5) * area_side / k, y))
        left -= k
    return np.array(out, dtype=float)


def street_grid(cfg: SimConfig) -> StreetGrid:
    return StreetGrid(cfg.area_side, cfg.block_size, tuple(cfg.turn_probs))


def device_capacity(cfg: SimConfig) -> float:
    return cfg.device_cap_factor * threshold(cfg)


def init_world(cfg: SimConfig, rng_seed: int | np.random.Generator | None = None) -> WorldState:
    """Fresh world: devices on random intersections, UAVs anywhere at altitude.

    Batteries start full-ish (devices at ``device_init_factor`` thresholds, UAVs
    at ``uav_init_energy``); the laser sits at the area centre.
    """
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.default_rng(cfg.rng_seed if rng_seed is None else rng_seed)
    grid = street_grid(cfg)
    dev_pos, headings = random_positions(grid, cfg.num_devices, rng)
    uav_pos = rng.uniform(0.0, cfg.area_side, size=(cfg.num_uavs, 2))
    theta = threshold(cfg)
    return WorldState(
        slot=0,
        device_pos=dev_pos,
        device_heading=headings,
        device_energy=np.full(cfg.num_devices, cfg.device_init_factor * theta),
        alpha=np.zeros(cfg.num_devices, dtype=np.int64),
        uav_pos=uav_pos,
        uav_energy=np.full(cfg.num_uavs, float(cfg.uav_init_energy)),
        beta=np.zeros(cfg.num_uavs, dtype=np.int64),
        uav_speed=np.full(cfg.num_uavs, float(max(cfg.speed_levels))),
        ap_pos=ap_grid(cfg.num_aps, cfg.area_side),
        laser_pos=np.array([cfg.area_side / 2.0, cfg.area_side / 2.0]),
        altitude=float(cfg.uav_altitude),
    )


def check_world(world: WorldState, cfg: SimConfig, tol: float = 1e-9) -> None:
    """Raise ``AssertionError`` if any state invariant is broken."""
    assert np.all(world.device_energy >= 0), "negative device energy"
    assert np.all(world.uav_energy >= 0), "negative UAV energy"
    for pts in (world.device_pos, world.uav_pos):
        assert np.all(pts >= -tol) and np.all(pts <= cfg.area_side + tol), "position out of bounds"
    assert set(np.unique(world.alpha)).issubset({0, 1})
    assert set(np.unique(world.beta)).issubset({0, 1})
    assert np.all(world.uav_xyz[:, 2] == cfg.uav_altitude)
