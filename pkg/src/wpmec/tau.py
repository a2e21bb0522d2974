"""Closed-form time allocation for one slot.

Once device types are fixed, per-slot efficiency as a function of the time split
``τ`` is a ratio of two affine functions, ``(Aτ + B) / (Cτ + D)``.  It is
monotone, so the optimum sits on one end of the feasible interval given by the
device energy constraints.  :func:`oracle_tau` brute-forces the same problem
on a grid straight from the physics formulas and exists to check the closed
form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .config import SimConfig

DEGENERATE_RTOL = 1e-12


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class SlotInputs:
    """Everything the time split depends on, per device and per UAV.

    ``h_serving`` is NaN for devices without a serving UAV.  ``local`` switches
    local computation off entirely (offloading-only operation).
    """

    alpha: np.ndarray
    residual: np.ndarray
    h_ap: np.ndarray
    h_serving: np.ndarray
    beta: np.ndarray
    speeds: np.ndarray
    local: bool = True

    @property
    def served(self) -> np.ndarray:
        return np.isfinite(self.h_serving)


@dataclass(frozen=True)
class FractionalCoefficients:
    A: float
    B: float
    C: float
    D: float

    @property
    def derivative_sign_term(self) -> float:
        """``AD − BC``; the objective's slope has this sign everywhere."""
        return self.A * self.D - self.B * self.C


@dataclass(frozen=True)
class TauInterval:
    lo: float
    hi: float
    feasible: bool

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def slot_inputs(world, alpha, beta, uav_pos, speeds, cfg: SimConfig, local: bool = True) -> SlotInputs:
    beta = np.asarray(beta, dtype=np.int64)
    gains = physics.gain_matrix(np.asarray(uav_pos, dtype=float), world.device_pos, cfg)
    return SlotInputs(
        alpha=np.asarray(alpha, dtype=np.int64),
        residual=np.asarray(world.device_energy, dtype=float),
        h_ap=physics.virtual_ap_gain(world.device_pos, world.ap_pos, cfg),
        h_serving=physics.serving_gain(gains, beta),
        beta=beta,
        speeds=np.asarray(speeds, dtype=float),
        local=local,
    )


def uav_power(inputs: SlotInputs, cfg: SimConfig) -> float:
    """Total UAV energy per unit time (flight plus serving compute)."""
    flight, compute = physics.uav_energy(inputs.beta, inputs.speeds, cfg)
    return float(np.sum(flight + compute)) / cfg.slot_duration


def coefficients(inputs: SlotInputs, cfg: SimConfig) -> FractionalCoefficients:
    a = inputs.alpha.astype(float)
    served = inputs.served
    rate = np.where(served, physics.offload_rate(np.where(served, inputs.h_serving, 0.0), cfg), 0.0)
    p = np.where(served, cfg.device_tx_power, 0.0)
    loc = 1.0 if inputs.local else 0.0
    sign = 2.0 * a - 1.0
    A = float(np.sum(sign * rate))
    B = float(np.sum(loc * cfg.device_cpu / cfg.cycles_per_bit + (1.0 - a) * rate))
    C = float(np.sum(p * sign))
    D = float(np.sum(loc * cfg.chip_coeff_device * cfg.device_cpu ** 3 + p * (1.0 - a))) \
        + uav_power(inputs, cfg)
    return FractionalCoefficients(A, B, C, D)


def objective(tau, coeffs: FractionalCoefficients):
    tau = np.asarray(tau, dtype=float)
    den = coeffs.C * tau + coeffs.D
    if np.any(den <= 0):
        raise ZeroDivisionError("non-positive denominator in efficiency ratio")
    out = (coeffs.A * tau + coeffs.B) / den
    return float(out) if out.ndim == 0 else out


def _constraint_lines(inputs: SlotInputs, cfg: SimConfig):
    """Per-device linear forms of the two energy constraints.

    Returns ``(first_coef, slope, const)`` such that the constraints read
    ``first_coef * τ ≤ E`` (nothing spent in the first period beyond the
    battery) and ``slope * τ + const ≤ E`` (slot consumption minus harvest).
    """
    T = cfg.slot_duration
    a = inputs.alpha.astype(float)
    p = np.where(inputs.served, cfg.device_tx_power, 0.0)
    kf3 = (cfg.chip_coeff_device * cfg.device_cpu ** 3) if inputs.local else 0.0
    hp = cfg.device_harvest_eff * inputs.h_ap * cfg.ap_tx_power
    first = (a * p + kf3) * T
    slope = T * (2.0 * a - 1.0) * (p + hp)
    const = kf3 * T + p * T * (1.0 - a) - hp * T * a
    return first, slope, const


def feasible_interval(inputs: SlotInputs, cfg: SimConfig) -> TauInterval:
    """Set of ``τ`` in ``[ε, 1 − ε]`` meeting both energy constraints for every device.

    The consumption constraint is solved from its raw linear form, so the
    direction of the bound follows the sign of its slope: type-2 devices get a
    lower bound and type-1 devices an upper bound.
    """
    eps = cfg.tau_epsilon
    E = inputs.residual
    first, slope, const = _constraint_lines(inputs, cfg)
    lo, hi, ok = eps, 1.0 - eps, True

    pos = first > 0
    if np.any(pos):
        hi = min(hi, float(np.min(E[pos] / first[pos])))
    up = slope > 0
    if np.any(up):
        hi = min(hi, float(np.min((E[up] - const[up]) / slope[up])))
    down = slope < 0
    if np.any(down):
        lo = max(lo, float(np.max((E[down] - const[down]) / slope[down])))
    flat = slope == 0
    if np.any(flat & (const > E)):
        ok = False
    return TauInterval(lo, hi, bool(ok and lo <= hi))


def solve_tau(coeffs: FractionalCoefficients, interval: TauInterval, rule: str = "derivative") -> float:
    """Maximiser of the efficiency ratio over ``interval``.

    ``rule="derivative"`` picks the end by the sign of ``AD − BC``; ``rule="capacity"``
    uses the sign of ``A`` alone (net type-1 minus type-2 uplink capacity), which
    agrees whenever ``AD − BC`` and ``A`` share a sign.  A vanishing deciding
    term makes the objective flat and the midpoint is returned.
    """
    if not interval.feasible:
        raise InfeasibleError(f"empty time-split interval [{interval.lo}, {interval.hi}]")
    if rule == "derivative":
        s = coeffs.derivative_sign_term
        scale = abs(coeffs.A * coeffs.D) + abs(coeffs.B * coeffs.C)
    elif rule == "capacity":
        s = coeffs.A
        scale = abs(coeffs.B)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if abs(s) <= DEGENERATE_RTOL * scale:
        return interval.midpoint
    return interval.hi if s > 0 else interval.lo


def tau_grid(cfg: SimConfig, step: float = 1e-4) -> np.ndarray:
    n = int(np.floor((1.0 - 2.0 * cfg.tau_epsilon) / step + 1e-9)) + 1
    return cfg.tau_epsilon + step * np.arange(n)


def _raw_terms(inputs: SlotInputs, taus: np.ndarray, cfg: SimConfig):
    """Bits, consumption and harvest per (τ, device) evaluated from the physics formulas."""
    t = taus[:, None]
    a = inputs.alpha[None, :]
    local, off = physics.device_bits(a, t, inputs.h_serving[None, :], cfg)
    e_loc, e_tx = physics.device_energy(a, t, cfg, served=inputs.served[None, :])
    if not inputs.local:
        local = np.zeros_like(local)
        e_loc = np.zeros_like(e_loc)
    harvest = physics.device_harvest(a, inputs.h_ap[None, :], t, cfg)
    kf3 = physics.local_energy(cfg) / cfg.slot_duration if inputs.local else 0.0
    first = (a * np.where(inputs.served, cfg.device_tx_power, 0.0)[None, :] + kf3) * t * cfg.slot_duration
    return local + off, e_loc + e_tx, harvest, first


def raw_objective(inputs: SlotInputs, taus, cfg: SimConfig) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    bits, used, _, _ = _raw_terms(inputs, taus, cfg)
    flight, compute = physics.uav_energy(inputs.beta, inputs.speeds, cfg)
    return bits.sum(axis=1) / (used.sum(axis=1) + float(np.sum(flight + compute)))


def violation(inputs: SlotInputs, taus, cfg: SimConfig) -> np.ndarray:
    """Total energy-constraint violation (J) at each ``τ``, summed over devices."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    _, used, harvest, first = _raw_terms(inputs, taus, cfg)
    E = inputs.residual[None, :]
    return (np.maximum(first - E, 0.0) + np.maximum(used - E - harvest, 0.0)).sum(axis=1)


def oracle_tau(inputs: SlotInputs, cfg: SimConfig, step: float = 1e-4, tol: float = 1e-12,
               tie_rtol: float = 1e-12) -> float:
    """Grid-search the feasible ``τ`` with the highest slot efficiency.

    Grid points within ``tie_rtol`` of the best value all count as maximisers
    and the one nearest their centre is returned, so a flat objective yields
    the middle of the feasible range rather than an arbitrary rounding winner.
    """
    taus = tau_grid(cfg, step)
    ok = violation(inputs, taus, cfg) <= tol
    if not np.any(ok):
        raise InfeasibleError("no feasible grid point")
    cand = taus[ok]
    vals = raw_objective(inputs, cand, cfg)
    best = cand[vals >= vals.max() * (1.0 - tie_rtol)]
    centre = 0.5 * (best[0] + best[-1])
    return float(best[int(np.argmin(np.abs(best - centre)))])


def fallback_tau(inputs: SlotInputs, cfg: SimConfig, step: float = 1e-4) -> float:
    """Grid point with the least total constraint violation (used when nothing is feasible)."""
    taus = tau_grid(cfg, step)
    return float(taus[int(np.argmin(violation(inputs, taus, cfg)))])
