from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    """One UAV's step: what it saw, what it did, what it got, where it ended up."""

    observation: np.ndarray
    action: int
    reward: float
    shaped_reward: float
    next_observation: np.ndarray
    slot: int
    done: bool


class ReplayBuffer:
    """Ring buffer of joint (all-UAV) transitions.

    Row ``i`` stores every UAV's transition for one slot, so a task network
    samples its own column and the shared network can pool all of them.
    """

    FIELDS = ("obs", "actions", "rewards", "shaped", "next_obs", "slots", "done")

    def __init__(self, capacity: int, num_uavs: int, obs_dim: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, num_uavs, obs_dim))
        self.actions = np.zeros((capacity, num_uavs), dtype=np.int64)
        self.rewards = np.zeros((capacity, num_uavs))
        self.shaped = np.zeros((capacity, num_uavs))
        self.next_obs = np.zeros((capacity, num_uavs, obs_dim))
        self.slots = np.zeros(capacity, dtype=np.int64)
        self.done = np.zeros(capacity)
        self.size = 0
        self.head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, actions, rewards, shaped, next_obs, slot: int, done: bool) -> None:
        i = self.head
        self.obs[i] = obs
        self.actions[i] = actions
        self.rewards[i] = rewards
        self.shaped[i] = shaped
        self.next_obs[i] = next_obs
        self.slots[i] = slot
        self.done[i] = float(done)
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        return rng.integers(0, self.size, size=batch)

    def transitions(self, idx: np.ndarray, u: int) -> list[Transition]:
        return [Transition(self.obs[i, u], int(self.actions[i, u]), float(self.rewards[i, u]),
                           float(self.shaped[i, u]), self.next_obs[i, u], int(self.slots[i]),
                           bool(self.done[i])) for i in idx]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"replay.{k}": getattr(self, k)[: self.size] for k in self.FIELDS}
        out["replay.size"] = np.array(self.size)
        out["replay.head"] = np.array(self.head)
        return out

    def load_arrays(self, arrays) -> None:
        self.size = int(arrays["replay.size"])
        for k in self.FIELDS:
            getattr(self, k)[: self.size] = arrays[f"replay.{k}"]
        self.head = int(arrays["replay.head"])
