"""Per-slot alternation between the time-split solver and the UAV controllers.

Each slot schedules device types from residual energy, then alternates between
solving the time split for the current UAV decisions and re-deciding the UAVs,
until neither moves.  Controllers are either the learned task networks (greedy
in the Boltzmann policy) or a hand-written greedy heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import physics
from .config import SimConfig
from .env import (
    MURAL_MODE,
    NSD_MODE,
    OO_MODE,
    SlotMetrics,
    SlotMode,
    apply_slot,
    decide_tau,
    device_types,
    move_devices,
)
from .rl.nets import PolicyNets
from .rl.spaces import ActionSpace, build_action_space, observe_all
from .world import WorldState, init_world, street_grid

POLICIES = ("mural", "oo", "nsd", "greedy")


@dataclass(frozen=True)
class UavDecision:
    beta: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    actions: np.ndarray | None = None


@dataclass(frozen=True)
class SlotDecision:
    tau: float
    alpha: np.ndarray
    beta: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    iterations: int
    converged: bool
    feasible: bool
    actions: np.ndarray | None = None


class Controller(Protocol):
    def decide(self, world: WorldState, tau: float, cfg: SimConfig) -> UavDecision: ...


class NetController:
    """Greedy action under each UAV's Boltzmann policy: argmax of log prior + μ·Q."""

    def __init__(self, nets: PolicyNets, space: ActionSpace, cfg: SimConfig):
        if nets.n_actions != len(space):
            raise ValueError(f"networks have {nets.n_actions} outputs but the action space has {len(space)}")
        self.nets, self.space = nets, space
        self.mu = cfg.inverse_temperature

    def actions(self, world: WorldState, cfg: SimConfig) -> np.ndarray:
        obs = observe_all(world, cfg)
        if obs.shape[1] != self.nets.obs_dim:
            raise ValueError(f"observation length {obs.shape[1]} does not match networks ({self.nets.obs_dim})")
        log_prior = self.nets.prior_log(obs)
        q = np.stack([self.nets.q_values(u, obs[u:u + 1])[0] for u in range(world.num_uavs)])
        return np.argmax(log_prior + self.mu * q, axis=1)

    def decide(self, world: WorldState, tau: float, cfg: SimConfig) -> UavDecision:
        a = self.actions(world, cfg)
        beta, pos, speeds = self.space.decode(a, world.uav_pos, cfg)
        return UavDecision(beta, pos, speeds, a)


def uav_threshold(cfg: SimConfig) -> float:
    """Energy a UAV needs to fly at top speed and compute for one slot."""
    v = max(cfg.speed_levels)
    return float(cfg.slot_duration * physics.flight_power(v, cfg)) + physics.uav_compute_energy(cfg)


class GreedyController:
    """Fly toward the centroid of the devices nearest to each UAV; serve when the battery allows."""

    def decide(self, world: WorldState, tau: float, cfg: SimConfig) -> UavDecision:
        uav = world.uav_pos
        d2 = np.sum((uav[:, None, :] - world.device_pos[None, :, :]) ** 2, axis=-1)
        owner = np.argmin(d2, axis=0)
        v_max = max(cfg.speed_levels)
        pos = uav.copy()
        speeds = np.zeros(world.num_uavs)
        for u in range(world.num_uavs):
            mine = owner == u
            if not np.any(mine):
                continue
            delta = world.device_pos[mine].mean(axis=0) - uav[u]
            dist = float(np.hypot(*delta))
            if dist <= 0.0:
                continue
            step = min(v_max * cfg.slot_duration, dist)
            pos[u] = np.clip(uav[u] + delta * (step / dist), 0.0, cfg.area_side)
            speeds[u] = step / cfg.slot_duration
        beta = (world.uav_energy > uav_threshold(cfg)).astype(np.int64)
        return UavDecision(beta, pos, speeds)


def baseline_policy(kind: str, cfg: SimConfig, nets: PolicyNets | None = None,
                    space: ActionSpace | None = None) -> tuple[Controller, SlotMode]:
    """Controller and slot mode for a named policy.

    ``oo`` and ``nsd`` reuse the learned UAV controller; ``greedy`` needs no networks.
    """
    kind = kind.lower()
    if kind not in POLICIES:
        raise ValueError(f"unknown policy {kind!r}; expected one of {', '.join(POLICIES)}")
    if kind == "greedy":
        return GreedyController(), MURAL_MODE
    if nets is None:
        raise ValueError(f"policy {kind!r} needs trained networks")
    ctrl = NetController(nets, space or build_action_space(cfg), cfg)
    return ctrl, {"mural": MURAL_MODE, "oo": OO_MODE, "nsd": NSD_MODE}[kind]


def run_slot(world: WorldState, controller: Controller, cfg: SimConfig,
             mode: SlotMode = MURAL_MODE) -> tuple[SlotDecision, SlotMetrics, WorldState]:
    """Alternate time split and UAV decisions to a fixed point, then apply the slot."""
    alpha = device_types(world, cfg, mode)
    beta, pos, speeds = world.beta.copy(), world.uav_pos.copy(), world.uav_speed.copy()
    actions = None
    tau_prev = float(world.tau)
    converged = False
    it = 0
    for it in range(1, cfg.max_inner_iters + 1):
        tau = decide_tau(world, alpha, beta, pos, speeds, cfg, mode).tau
        new = controller.decide(world, tau, cfg)
        d_beta = float(np.sum(np.abs(new.beta - beta)))
        d_pos = float(np.sum(np.hypot(*(new.positions - pos).T)))
        d_tau = abs(tau - tau_prev)
        beta, pos, speeds, actions = new.beta, new.positions, new.speeds, new.actions
        tau_prev = tau
        if d_beta <= cfg.psi_beta and d_pos <= cfg.psi_position and d_tau <= cfg.psi_tau:
            converged = True
            break
    final = decide_tau(world, alpha, beta, pos, speeds, cfg, mode)
    metrics, nxt = apply_slot(world, alpha, beta, pos, speeds, final.tau, cfg, mode, final.feasible)
    decision = SlotDecision(final.tau, alpha, beta.copy(), pos.copy(), speeds.copy(), it, converged,
                            final.feasible, None if actions is None else actions.copy())
    return decision, metrics, nxt


@dataclass
class EpisodeMetrics:
    mean_efficiency: float
    avg_bits: float
    avg_energy: float
    total_bits: float
    total_energy: float
    mean_device_harvest: float
    converged_fraction: float
    slots: int
    efficiencies: list[float] = field(default_factory=list)


def run_episode(world0: WorldState, controller: Controller, cfg: SimConfig, mode: SlotMode = MURAL_MODE,
                rng: np.random.Generator | None = None, slots: int | None = None,
                keep: list | None = None) -> EpisodeMetrics:
    """Run ``slots`` consecutive slots with device mobility between them.

    When ``keep`` is a list, each slot's ``(decision, metrics)`` pair is appended to it.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    n = cfg.slots_per_episode if slots is None else int(slots)
    grid = street_grid(cfg)
    world = world0
    effs, bits, energy, harvest, conv = [], [], [], [], []
    for _ in range(n):
        dec, m, world = run_slot(world, controller, cfg, mode)
        world = move_devices(world, grid, cfg, rng)
        effs.append(m.efficiency)
        bits.append(m.total_bits)
        energy.append(m.total_energy)
        harvest.append(float(np.mean(m.device_harvest_raw)))
        conv.append(dec.converged)
        if keep is not None:
            keep.append((dec, m))
    return EpisodeMetrics(
        mean_efficiency=float(np.mean(effs)),
        avg_bits=float(np.mean(bits)),
        avg_energy=float(np.mean(energy)),
        total_bits=float(np.sum(bits)),
        total_energy=float(np.sum(energy)),
        mean_device_harvest=float(np.mean(harvest)),
        converged_fraction=float(np.mean(conv)),
        slots=n,
        efficiencies=effs,
    )


def evaluate_policy(kind: str, cfg: SimConfig, nets: PolicyNets | None = None, episodes: int = 1,
                    seed: int = 0, slots: int | None = None) -> list[EpisodeMetrics]:
    """Evaluate a named policy on freshly initialised, seeded episodes."""
    controller, mode = baseline_policy(kind, cfg, nets)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(episodes):
        world = init_world(cfg, rng)
        out.append(run_episode(world, controller, cfg, mode, rng, slots))
    return out
