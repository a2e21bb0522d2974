"""Random single-slot instances drawn from the simulator's own state space."""

from __future__ import annotations

import numpy as np

from wpmec.config import SimConfig, validate_config
from wpmec.rl.spaces import build_action_space
from wpmec.scheduling import schedule_devices, threshold
from wpmec.tau import SlotInputs, feasible_interval, slot_inputs
from wpmec.world import device_capacity, init_world


def random_instance(rng: np.random.Generator, base: SimConfig | None = None) -> tuple[SimConfig, SlotInputs]:
    """A world with random size, batteries, UAV roles and moves, device types scheduled by threshold."""
    base = base or SimConfig()
    cfg = validate_config(base.replace(
        num_devices=int(rng.integers(2, 41)),
        num_uavs=int(rng.integers(1, 9)),
        num_aps=int(rng.integers(4, 10)),
    ))
    world = init_world(cfg, rng)
    world.device_energy = rng.uniform(0.0, device_capacity(cfg), cfg.num_devices)
    world.uav_pos = rng.uniform(0.0, cfg.area_side, (cfg.num_uavs, 2))
    space = build_action_space(cfg)
    actions = rng.integers(0, len(space), cfg.num_uavs)
    beta, pos, speeds = space.decode(actions, world.uav_pos, cfg)
    alpha = schedule_devices(world.device_energy, threshold(cfg))
    return cfg, slot_inputs(world, alpha, beta, pos, speeds, cfg)


def feasible_instances(n: int, seed: int = 0) -> list[tuple[SimConfig, SlotInputs]]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        cfg, inputs = random_instance(rng)
        if feasible_interval(inputs, cfg).feasible:
            out.append((cfg, inputs))
    return out
