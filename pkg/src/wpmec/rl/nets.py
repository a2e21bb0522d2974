"""Fully connected networks with hand-written backprop and Adam, in float64."""

from __future__ import annotations

import numpy as np


class MLP:
    """ReLU multilayer perceptron with a linear output layer."""

    def __init__(self, sizes: list[int], rng: np.random.Generator, out_scale: float = 0.1):
        self.sizes = [int(s) for s in sizes]
        self.params: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            std = np.sqrt(2.0 / fan_in)
            if i == len(self.sizes) - 2:
                std *= out_scale
            self.params.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray, keep: bool = False):
        h = np.asarray(x, dtype=np.float64)
        cache = [h]
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return (h, cache) if keep else h

    __call__ = forward

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        grads: list[np.ndarray] = [np.empty(0)] * len(self.params)
        g = grad_out
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * (cache[i + 1] > 0)
            grads[2 * i] = cache[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.params[2 * i].T
        return grads

    def copy(self) -> "MLP":
        new = MLP.__new__(MLP)
        new.sizes = list(self.sizes)
        new.params = [p.copy() for p in self.params]
        return new

    def load(self, params: list[np.ndarray]) -> None:
        for dst, src in zip(self.params, params):
            dst[...] = src

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, v: np.ndarray) -> None:
        i = 0
        for p in self.params:
            p[...] = v[i:i + p.size].reshape(p.shape)
            i += p.size


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def q_loss_and_grad(net: MLP, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared error on the taken actions and its parameter gradient."""
    q, cache = net.forward(obs, keep=True)
    n = len(actions)
    rows = np.arange(n)
    diff = q[rows, actions] - targets
    loss = float(np.mean(diff ** 2))
    g = np.zeros_like(q)
    g[rows, actions] = 2.0 * diff / n
    return loss, net.backward(cache, g)


def nll_loss_and_grad(net: MLP, obs: np.ndarray, actions: np.ndarray):
    """Mean negative log-likelihood of ``actions`` under ``softmax(net(obs))``."""
    logits, cache = net.forward(obs, keep=True)
    logp = log_softmax(logits)
    n = len(actions)
    rows = np.arange(n)
    loss = float(-np.mean(logp[rows, actions]))
    g = np.exp(logp)
    g[rows, actions] -= 1.0
    return loss, net.backward(cache, g / n)


class PolicyNets:
    """One shared prior network plus one Q network (and frozen copy) per UAV."""

    def __init__(self, obs_dim: int, n_actions: int, num_uavs: int, hidden: tuple[int, ...],
                 lr: float, rng: np.random.Generator):
        sizes = [obs_dim, *hidden, n_actions]
        self.obs_dim, self.n_actions, self.num_uavs = obs_dim, n_actions, num_uavs
        self.shared = MLP(sizes, rng)
        self.task = [MLP(sizes, rng) for _ in range(num_uavs)]
        self.target = [net.copy() for net in self.task]
        self.shared_opt = Adam(self.shared.params, lr)
        self.task_opt = [Adam(net.params, lr) for net in self.task]

    def prior(self, obs: np.ndarray) -> np.ndarray:
        return np.exp(self.prior_log(obs))

    def prior_log(self, obs: np.ndarray) -> np.ndarray:
        return log_softmax(self.shared(obs))

    def q_values(self, u: int, obs: np.ndarray) -> np.ndarray:
        return self.task[u](obs)

    def sync_targets(self) -> None:
        for tgt, net in zip(self.target, self.task):
            tgt.load(net.params)

    def networks(self) -> list[tuple[str, MLP, Adam | None]]:
        out: list[tuple[str, MLP, Adam | None]] = [("shared", self.shared, self.shared_opt)]
        for u in range(self.num_uavs):
            out.append((f"task{u}", self.task[u], self.task_opt[u]))
            out.append((f"target{u}", self.target[u], None))
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat name → array mapping of every parameter and optimizer moment."""
        out: dict[str, np.ndarray] = {}
        for name, net, opt in self.networks():
            for i, p in enumerate(net.params):
                out[f"{name}.p{i}"] = p
            if opt is not None:
                for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                    out[f"{name}.m{i}"] = m
                    out[f"{name}.v{i}"] = v
                out[f"{name}.t"] = np.array(opt.t)
        return out

    def load_arrays(self, arrays) -> None:
        for name, net, opt in self.networks():
            for i, p in enumerate(net.params):
                p[...] = arrays[f"{name}.p{i}"]
            if opt is not None:
                for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                    m[...] = arrays[f"{name}.m{i}"]
                    v[...] = arrays[f"{name}.v{i}"]
                opt.t = int(arrays[f"{name}.t"])
