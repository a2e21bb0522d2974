"""Multi-task soft Q-learning with a distilled shared prior.

Each UAV has its own Q network trained against soft Bellman targets under the
shared prior; the shared network is fit by maximum likelihood to the actions the
task policies take.  The environment step uses the closed-form device
scheduling and time split for whatever the UAVs decided.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..config import SimConfig, validate_config
from ..env import MURAL_MODE, SlotMode, move_devices, reference_efficiency, run_decisions
from ..world import WorldState, init_world, street_grid
from .nets import PolicyNets, nll_loss_and_grad, q_loss_and_grad
from .replay import ReplayBuffer, Transition
from .softq import boltzmann_policy, q_target, reward, shaped_reward, soft_value
from .spaces import ActionSpace, build_action_space, obs_dim, observe_all

CHECKPOINT_VERSION = 1


class TrainingError(FloatingPointError):
    pass


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    @classmethod
    def from_transitions(cls, items: list[Transition]) -> "Batch":
        return cls(
            obs=np.stack([t.observation for t in items]),
            actions=np.array([t.action for t in items], dtype=np.int64),
            rewards=np.array([t.reward for t in items]),
            next_obs=np.stack([t.next_observation for t in items]),
            done=np.array([float(t.done) for t in items]),
        )


@dataclass
class EpisodeLog:
    episode: int
    reward: float
    loss_task_mean: float
    loss_shared: float
    mean_efficiency: float
    penalties: int


def task_targets(batch: Batch, nets: PolicyNets, u: int, cfg: SimConfig) -> np.ndarray:
    """Soft Bellman targets; the next-state value uses the frozen copy of the task net."""
    mu = cfg.inverse_temperature
    log_prior = nets.prior_log(batch.obs)[np.arange(len(batch.actions)), batch.actions]
    next_v = soft_value(nets.target[u](batch.next_obs), nets.prior(batch.next_obs), mu)
    return q_target(batch.rewards, log_prior, next_v, batch.done, cfg)


def _check(loss: float, what: str, batch_size: int) -> None:
    if not math.isfinite(loss):
        raise TrainingError(f"{what} loss is {loss} on a batch of {batch_size}")


def train_task_network(batch: Batch | list[Transition], nets: PolicyNets, u: int, cfg: SimConfig) -> float:
    """One Adam step on UAV ``u``'s Q network; returns the loss before the step."""
    if not isinstance(batch, Batch):
        batch = Batch.from_transitions(batch)
    y = task_targets(batch, nets, u, cfg)
    loss, grads = q_loss_and_grad(nets.task[u], batch.obs, batch.actions, y)
    _check(loss, f"task {u}", len(y))
    nets.task_opt[u].step(grads)
    return loss


def train_shared_network(obs: np.ndarray, actions: np.ndarray, nets: PolicyNets, cfg: SimConfig) -> float:
    """One Adam step pulling the shared prior toward the executed task actions."""
    loss, grads = nll_loss_and_grad(nets.shared, obs, actions)
    _check(loss, "shared", len(actions))
    nets.shared_opt.step(grads)
    return loss


def _sample(p: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(p) - 1))


def task_policies(nets: PolicyNets, obs: np.ndarray, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-UAV Boltzmann policies and shared-prior probabilities, both (U, n_actions)."""
    prior = nets.prior(obs)
    q = np.stack([nets.q_values(u, obs[u:u + 1])[0] for u in range(nets.num_uavs)])
    return boltzmann_policy(q, prior, cfg.inverse_temperature), prior


class Trainer:
    """Holds networks, replay memory and RNG streams; runs training episodes."""

    def __init__(self, cfg: SimConfig, seed: int | None = None, action_space: ActionSpace | None = None,
                 world_factory: Callable[[np.random.Generator], WorldState] | None = None,
                 mode: SlotMode = MURAL_MODE):
        self.cfg = validate_config(cfg)
        self.seed = cfg.rng_seed if seed is None else int(seed)
        self.space = action_space or build_action_space(cfg)
        self.world_factory = world_factory or (lambda rng: init_world(self.cfg, rng))
        self.mode = mode
        ss = np.random.SeedSequence(self.seed)
        init_ss, world_ss, act_ss, replay_ss = ss.spawn(4)
        self.world_rng = np.random.default_rng(world_ss)
        self.act_rng = np.random.default_rng(act_ss)
        self.replay_rng = np.random.default_rng(replay_ss)
        self.obs_dim = obs_dim(cfg)
        self.nets = PolicyNets(self.obs_dim, len(self.space), cfg.num_uavs, tuple(cfg.hidden_sizes),
                               cfg.learning_rate, np.random.default_rng(init_ss))
        self.buffer = ReplayBuffer(cfg.replay_capacity, cfg.num_uavs, self.obs_dim)
        self.reward_scale = reference_efficiency(cfg)
        self.grid = street_grid(cfg)
        self.episode = 0
        self.steps = 0
        self.logs: list[EpisodeLog] = []

    def explore_rate(self, episode: int) -> float:
        cfg = self.cfg
        horizon = max(cfg.explore_fraction * cfg.episodes, 1.0)
        frac = min(episode / horizon, 1.0)
        return cfg.explore_start + (cfg.explore_end - cfg.explore_start) * frac

    def _learn(self) -> tuple[list[float], float]:
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return [], math.nan
        buf = self.buffer
        losses = []
        for u in range(cfg.num_uavs):
            idx = buf.sample_indices(self.replay_rng, cfg.batch_size)
            batch = Batch(buf.obs[idx, u], buf.actions[idx, u], buf.rewards[idx, u],
                          buf.next_obs[idx, u], buf.done[idx])
            losses.append(train_task_network(batch, self.nets, u, cfg))
        idx = buf.sample_indices(self.replay_rng, cfg.batch_size)
        obs = buf.obs[idx].reshape(-1, self.obs_dim)
        acts = buf.actions[idx].reshape(-1)
        return losses, train_shared_network(obs, acts, self.nets, cfg)

    def run_episode(self) -> EpisodeLog:
        cfg = self.cfg
        eps = self.explore_rate(self.episode)
        n = len(self.space)
        world = self.world_factory(self.world_rng)
        history: list[float] = []
        total_reward = 0.0
        task_losses: list[float] = []
        shared_losses: list[float] = []
        penalties = 0
        obs = observe_all(world, cfg)
        for t in range(cfg.slots_per_episode):
            pi, prior = task_policies(self.nets, obs, cfg)
            behave = (1.0 - eps) * pi + eps / n
            actions = np.array([_sample(behave[u], self.act_rng) for u in range(cfg.num_uavs)])
            beta, pos, speeds = self.space.decode(actions, world.uav_pos, cfg)
            metrics, world, _ = run_decisions(world, beta, pos, speeds, cfg, self.mode)
            world = move_devices(world, self.grid, cfg, self.world_rng)
            history.append(metrics.efficiency)
            r = reward(history, metrics.penalty, cfg, self.reward_scale)
            log_prior = np.log(prior[np.arange(cfg.num_uavs), actions])
            shaped = shaped_reward(r, log_prior, cfg)
            next_obs = observe_all(world, cfg)
            done = t == cfg.slots_per_episode - 1
            self.buffer.add(obs, actions, r, shaped, next_obs, t, done)
            obs = next_obs
            total_reward += float(np.sum(r))
            penalties += int(np.count_nonzero(metrics.penalty))

            losses, shared = self._learn()
            task_losses.extend(losses)
            if not math.isnan(shared):
                shared_losses.append(shared)
            self.steps += 1
            if self.steps % cfg.target_sync == 0:
                self.nets.sync_targets()
        log = EpisodeLog(
            episode=self.episode,
            reward=total_reward,
            loss_task_mean=float(np.mean(task_losses)) if task_losses else math.nan,
            loss_shared=float(np.mean(shared_losses)) if shared_losses else math.nan,
            mean_efficiency=float(np.mean(history)),
            penalties=penalties,
        )
        self.logs.append(log)
        self.episode += 1
        return log

    def train(self, episodes: int | None = None, progress: Callable[[EpisodeLog], None] | None = None) -> list[EpisodeLog]:
        target = self.cfg.episodes if episodes is None else self.episode + int(episodes)
        while self.episode < target:
            log = self.run_episode()
            if progress is not None:
                progress(log)
        return self.logs

    # checkpoints -------------------------------------------------------------

    def _meta(self) -> dict:
        return {
            "format": "wpmec-checkpoint",
            "checkpoint_version": CHECKPOINT_VERSION,
            "package_version": __version__,
            "config": self.cfg.to_dict(),
            "seed": self.seed,
            "episode": self.episode,
            "steps": self.steps,
            "obs_dim": self.obs_dim,
            "n_actions": len(self.space),
            "action_labels": list(self.space.labels),
            "rng": {
                "world": self.world_rng.bit_generator.state,
                "act": self.act_rng.bit_generator.state,
                "replay": self.replay_rng.bit_generator.state,
            },
            "logs": [asdict(log) for log in self.logs],
        }

    def save(self, path: str | Path) -> None:
        arrays = dict(self.nets.arrays())
        arrays.update(self.buffer.arrays())
        arrays["meta"] = np.array(json.dumps(self._meta(), sort_keys=True))
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path, action_space: ActionSpace | None = None) -> "Trainer":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != "wpmec-checkpoint":
                raise ValueError(f"{path}: not a wpmec checkpoint")
            if meta["checkpoint_version"] != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {meta['checkpoint_version']}")
            cfg = validate_config(meta["config"])
            tr = cls(cfg, seed=meta["seed"], action_space=action_space)
            if len(tr.space) != meta["n_actions"]:
                raise ValueError("action space does not match checkpoint")
            tr.nets.load_arrays(data)
            tr.buffer.load_arrays(data)
        tr.episode = meta["episode"]
        tr.steps = meta["steps"]
        tr.world_rng.bit_generator.state = meta["rng"]["world"]
        tr.act_rng.bit_generator.state = meta["rng"]["act"]
        tr.replay_rng.bit_generator.state = meta["rng"]["replay"]
        tr.logs = [EpisodeLog(**d) for d in meta["logs"]]
        return tr


def run_training(cfg: SimConfig, world_factory: Callable[[np.random.Generator], WorldState] | None = None,
                 seed: int | None = None, episodes: int | None = None) -> tuple[PolicyNets, list[EpisodeLog]]:
    """Train from scratch and return the networks plus the per-episode log."""
    tr = Trainer(cfg, seed=seed, world_factory=world_factory)
    tr.train(episodes)
    return tr.nets, tr.logs
