"""One-slot engine: decide the time split, apply decisions, account energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .config import SimConfig
from .mobility import StreetGrid, step_all
from .rl.softq import penalty
from .scheduling import schedule_devices, threshold
from .tau import (
    SlotInputs,
    TauInterval,
    coefficients,
    fallback_tau,
    feasible_interval,
    slot_inputs,
    solve_tau,
)
from .world import WorldState, device_capacity

_TOL = 1e-12


@dataclass(frozen=True)
class SlotMode:
    """Knobs distinguishing the proposed scheme from its ablations.

    ``local=False`` disables local computation; ``fixed_alpha`` forces every
    device type; ``fixed_tau`` bypasses the time-split solver.
    """

    local: bool = True
    fixed_alpha: int | None = None
    fixed_tau: float | None = None
    tau_rule: str = "derivative"


MURAL_MODE = SlotMode()
OO_MODE = SlotMode(local=False)
NSD_MODE = SlotMode(fixed_alpha=1, fixed_tau=0.5)


@dataclass
class SlotMetrics:
    slot: int
    tau: float
    feasible: bool
    alpha: np.ndarray
    beta: np.ndarray
    device_bits: np.ndarray
    device_local_bits: np.ndarray
    device_offload_bits: np.ndarray
    device_energy: np.ndarray
    device_harvest: np.ndarray  # stored in the battery
    device_harvest_raw: np.ndarray
    skipped_offload: np.ndarray
    brownout: np.ndarray  # fraction of local work actually run
    uav_energy: np.ndarray
    uav_harvest: np.ndarray  # stored in the battery
    uav_harvest_raw: np.ndarray
    penalty: np.ndarray
    overspent: np.ndarray
    device_residual_before: np.ndarray
    uav_residual_before: np.ndarray

    @property
    def total_bits(self) -> float:
        return float(np.sum(self.device_bits))

    @property
    def local_bits(self) -> float:
        return float(np.sum(self.device_local_bits))

    @property
    def offload_bits(self) -> float:
        return float(np.sum(self.device_offload_bits))

    @property
    def total_device_energy(self) -> float:
        return float(np.sum(self.device_energy))

    @property
    def total_uav_energy(self) -> float:
        return float(np.sum(self.uav_energy))

    @property
    def total_energy(self) -> float:
        return self.total_device_energy + self.total_uav_energy

    @property
    def efficiency(self) -> float:
        return physics.slot_efficiency(self.device_bits, self.device_energy, self.uav_energy)


@dataclass(frozen=True)
class TauDecision:
    tau: float
    interval: TauInterval
    feasible: bool
    inputs: SlotInputs


def device_types(world: WorldState, cfg: SimConfig, mode: SlotMode = MURAL_MODE) -> np.ndarray:
    if mode.fixed_alpha is not None:
        return np.full(world.num_devices, int(mode.fixed_alpha), dtype=np.int64)
    return schedule_devices(world.device_energy, threshold(cfg))


def decide_tau(world: WorldState, alpha, beta, uav_pos, speeds, cfg: SimConfig,
               mode: SlotMode = MURAL_MODE) -> TauDecision:
    inputs = slot_inputs(world, alpha, beta, uav_pos, speeds, cfg, local=mode.local)
    interval = feasible_interval(inputs, cfg)
    if mode.fixed_tau is not None:
        tau = float(mode.fixed_tau)
        ok = interval.feasible and interval.lo <= tau <= interval.hi
        return TauDecision(tau, interval, ok, inputs)
    if interval.feasible:
        return TauDecision(solve_tau(coefficients(inputs, cfg), interval, mode.tau_rule), interval, True, inputs)
    return TauDecision(fallback_tau(inputs, cfg), interval, False, inputs)


def apply_slot(world: WorldState, alpha, beta, uav_pos, speeds, tau: float, cfg: SimConfig,
               mode: SlotMode = MURAL_MODE, feasible: bool = True) -> tuple[SlotMetrics, WorldState]:
    """Run one slot with every decision fixed and return its metrics and the next state.

    A device whose energy constraints fail at ``tau`` skips offloading; if even
    local computation is unaffordable it runs only the fraction of its local work
    its battery plus harvest can pay for.  UAV batteries never go below zero; a
    UAV that spends more than it had is flagged and penalised instead.
    """
    T = cfg.slot_duration
    alpha = np.asarray(alpha, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.int64)
    uav_pos = np.asarray(uav_pos, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    E = world.device_energy.astype(float)

    gains = physics.gain_matrix(uav_pos, world.device_pos, cfg)
    h_srv = physics.serving_gain(gains, beta)
    h_ap = physics.virtual_ap_gain(world.device_pos, world.ap_pos, cfg)
    harvest_raw = physics.device_harvest(alpha, h_ap, tau, cfg)

    loc_scale = 1.0 if mode.local else 0.0
    kf3T = physics.local_energy(cfg) * loc_scale
    served = np.isfinite(h_srv)

    def demand(serve):
        tx = np.where(serve, physics.period_factor(alpha, tau) * T * cfg.device_tx_power, 0.0)
        first = (alpha * np.where(serve, cfg.device_tx_power, 0.0) * T + kf3T) * tau
        return kf3T + tx, first

    used, first = demand(served)
    bad = (used > E + harvest_raw + _TOL) | (first > E + _TOL)
    skipped = bad & served
    served = served & ~bad
    used, first = demand(served)

    rho = np.ones(world.num_devices)
    if kf3T > 0:
        short = (used > E + harvest_raw + _TOL) | (first > E + _TOL)
        if np.any(short):
            cap10b = (E + harvest_raw) / kf3T
            cap10a = E / (kf3T * tau)
            rho = np.where(short, np.clip(np.minimum(cap10b, cap10a), 0.0, 1.0), 1.0)
    e_local = rho * kf3T
    e_tx = used - kf3T
    used = e_local + e_tx

    local_b = rho * physics.local_bits(cfg) * loc_scale
    _, off_b = physics.device_bits(alpha, tau, np.where(served, h_srv, np.nan), cfg)

    cap_d = device_capacity(cfg)
    pre_d = E + harvest_raw - used
    new_E = np.clip(pre_d, 0.0, cap_d)
    stored_d = np.minimum(harvest_raw, np.maximum(cap_d - E + used, 0.0))

    flight, compute = physics.uav_energy(beta, speeds, cfg)
    u_used = flight + compute
    g = physics.laser_gain(uav_pos, world.laser_pos, cfg)
    u_harvest_raw = physics.uav_harvest(beta, g, cfg)
    pre_u = world.uav_energy + u_harvest_raw - u_used
    overspent = pre_u < 0.0
    pen = np.atleast_1d(penalty(u_used, world.uav_energy, u_harvest_raw, cfg))
    new_U = np.clip(pre_u, 0.0, cfg.uav_capacity)
    stored_u = np.minimum(u_harvest_raw, np.maximum(cfg.uav_capacity - world.uav_energy + u_used, 0.0))

    metrics = SlotMetrics(
        slot=world.slot,
        tau=float(tau),
        feasible=bool(feasible),
        alpha=alpha.copy(),
        beta=beta.copy(),
        device_bits=local_b + off_b,
        device_local_bits=local_b,
        device_offload_bits=off_b,
        device_energy=used,
        device_harvest=stored_d,
        device_harvest_raw=harvest_raw,
        skipped_offload=skipped,
        brownout=rho,
        uav_energy=u_used,
        uav_harvest=stored_u,
        uav_harvest_raw=u_harvest_raw,
        penalty=pen,
        overspent=overspent,
        device_residual_before=E.copy(),
        uav_residual_before=world.uav_energy.copy(),
    )
    nxt = world.copy()
    nxt.slot = world.slot + 1
    nxt.device_energy = new_E
    nxt.alpha = alpha.copy()
    nxt.uav_pos = uav_pos.copy()
    nxt.uav_energy = new_U
    nxt.beta = beta.copy()
    nxt.uav_speed = speeds.copy()
    nxt.tau = float(tau)
    return metrics, nxt


def run_decisions(world: WorldState, beta, uav_pos, speeds, cfg: SimConfig,
                  mode: SlotMode = MURAL_MODE) -> tuple[SlotMetrics, WorldState, TauDecision]:
    """Schedule devices, pick the time split, and apply one slot."""
    alpha = device_types(world, cfg, mode)
    dec = decide_tau(world, alpha, beta, uav_pos, speeds, cfg, mode)
    metrics, nxt = apply_slot(world, alpha, beta, uav_pos, speeds, dec.tau, cfg, mode, dec.feasible)
    return metrics, nxt, dec


def move_devices(world: WorldState, grid: StreetGrid, cfg: SimConfig, rng: np.random.Generator) -> WorldState:
    nxt = world.copy()
    nxt.device_pos, nxt.device_heading, _ = step_all(
        world.device_pos, world.device_heading, grid, cfg.device_max_speed, rng, cfg.slot_duration)
    return nxt


def reference_efficiency(cfg: SimConfig) -> float:
    """Local-only efficiency with every UAV cruising at top speed; used as a reward scale."""
    bits = cfg.num_devices * physics.local_bits(cfg)
    energy = cfg.num_devices * physics.local_energy(cfg) \
        + cfg.num_uavs * cfg.slot_duration * float(physics.flight_power(max(cfg.speed_levels), cfg))
    return bits / energy
