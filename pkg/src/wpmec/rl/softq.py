"""Soft Bellman quantities for prior-regularised task policies."""

from __future__ import annotations

import numpy as np

from ..config import SimConfig


def penalty(energy_use, residual, harvest, cfg: SimConfig):
    """``cfg.penalty`` where a UAV spends more than it had plus what it harvested, else 0."""
    over = np.asarray(energy_use, dtype=float) - np.asarray(residual, dtype=float) \
        - np.asarray(harvest, dtype=float)
    out = np.where(over <= 0.0, 0.0, float(cfg.penalty))
    return float(out) if out.ndim == 0 else out


def reward(efficiency_history, penalties, cfg: SimConfig, scale: float = 1.0) -> np.ndarray:
    """Per-UAV reward of the latest slot, penalty already subtracted.

    ``efficiency_history`` holds this episode's slot efficiencies up to and
    including the current slot.  Incremental mode rewards the current slot
    only; cumulative mode rewards the running sum.
    """
    hist = np.asarray(efficiency_history, dtype=float)
    if cfg.reward_mode == "cumulative":
        base = float(np.sum(hist))
    else:
        base = float(hist[-1])
    return base / scale - np.asarray(penalties, dtype=float)


def shaped_reward(r, log_prior, cfg: SimConfig):
    """Add the prior log-likelihood bonus ``(λ/μ) log π0(a|s)``."""
    lp = np.asarray(log_prior, dtype=float)
    if np.any(~np.isfinite(lp)):
        raise ValueError("prior probability of the taken action is zero")
    return r + cfg.distill_weight / cfg.inverse_temperature * lp


def soft_value(q, prior, mu: float) -> np.ndarray:
    """``(1/μ) log Σ_a π0(a) exp(μ Q(a))`` along the last axis, max-shifted."""
    q = np.asarray(q, dtype=float)
    prior = np.asarray(prior, dtype=float)
    z = mu * q
    support = prior > 0
    zmax = np.max(np.where(support, z, -np.inf), axis=-1, keepdims=True)
    s = np.sum(np.where(support, prior * np.exp(np.where(support, z - zmax, 0.0)), 0.0), axis=-1)
    return (np.log(s) + zmax[..., 0]) / mu


def boltzmann_policy(q, prior, mu: float) -> np.ndarray:
    """``π0(a) exp(μ (Q(a) − V))`` along the last axis."""
    q = np.asarray(q, dtype=float)
    prior = np.asarray(prior, dtype=float)
    v = soft_value(q, prior, mu)
    with np.errstate(under="ignore"):
        return prior * np.exp(mu * (q - v[..., None]))


def q_target(r, log_prior, next_value, done, cfg: SimConfig):
    """Soft Q-learning target ``r + (λ/μ) log π0(a|s) + γ V(s') (1 − done)``."""
    done = np.asarray(done, dtype=float)
    return shaped_reward(r, log_prior, cfg) + cfg.discount * np.asarray(next_value, dtype=float) * (1.0 - done)
