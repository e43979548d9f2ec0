"""Prioritized experience replay on top of an array-backed sum tree."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np


class SumTree:
    """Binary tree of partial sums over ``capacity`` leaves.

    Leaves live at ``tree[size:size + capacity]`` with ``size`` the next
    power of two, node ``i`` holds ``tree[2i] + tree[2i + 1]`` and the root
    is ``tree[1]``. Updates and prefix-sum lookups take batches.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.size = 1 << max(0, (capacity - 1).bit_length())
        self.tree = np.zeros(2 * self.size)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def leaves(self) -> np.ndarray:
        return self.tree[self.size : self.size + self.capacity]

    def update(self, idx, values) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        values = np.broadcast_to(np.asarray(values, dtype=float), idx.shape)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("priorities must be finite and non-negative")
        if idx.size and (idx.min() < 0 or idx.max() >= self.capacity):
            raise IndexError("leaf index out of range")
        if idx.size == 1:
            node = int(idx[0]) + self.size
            self.tree[node] = values[0]
            node >>= 1
            while node:
                self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1]
                node >>= 1
            return
        # duplicates: the last write wins, like sequential assignment
        nodes = idx + self.size
        self.tree[nodes] = values
        nodes = np.unique(nodes >> 1)
        while nodes[0] >= 1:
            self.tree[nodes] = self.tree[2 * nodes] + self.tree[2 * nodes + 1]
            if nodes[0] == 1:
                break
            nodes = np.unique(nodes >> 1)

    def find(self, mass) -> np.ndarray:
        """Leaf indices whose cumulative-sum bucket contains each ``mass``."""
        mass = np.array(mass, dtype=float, ndmin=1)
        node = np.ones(mass.shape, dtype=np.int64)
        while node[0] < self.size:
            left = 2 * node
            lv = self.tree[left]
            go_right = mass >= lv
            mass = np.where(go_right, mass - lv, mass)
            node = np.where(go_right, left + 1, left)
        leaf = node - self.size
        # round-off can push a draw onto an empty leaf past the end
        return np.minimum(leaf, self.capacity - 1)


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    indices: np.ndarray


class PrioritizedReplay:
    """FIFO ring buffer of transitions sampled in proportion to p**alpha.

    New transitions enter with the current maximum priority so each is
    replayed at least once with high probability.
    """

    def __init__(self, capacity: int, obs_dim: int, alpha: float = 0.6, eps: float = 1e-6):
        self.capacity = capacity
        self.alpha = alpha
        self.eps = eps
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.tree = SumTree(capacity)
        self.max_priority = 1.0
        self.pos = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.pos
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = int(action)
        self.rewards[i] = reward
        self.dones[i] = float(done)
        self.tree.update(i, self.max_priority**self.alpha)
        self.pos = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Stratified proportional draw: one uniform point per equal slice
        of the total priority mass."""
        if self.count == 0:
            raise ValueError("cannot sample from an empty buffer")
        seg = self.tree.total / n
        mass = (np.arange(n) + rng.random(n)) * seg
        return np.minimum(self.tree.find(mass), self.count - 1)

    def sample(self, n: int, beta: float, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(n, rng)
        total = self.tree.total
        probs = self.tree.tree[idx + self.tree.size] / total
        p_min = self.tree.leaves()[: self.count].min() / total
        # normalised so the largest weight is 1
        weights = (probs / p_min) ** (-beta)
        return Batch(
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
            weights,
            idx,
        )

    def update_priorities(self, idx, td_errors) -> None:
        p = np.abs(np.asarray(td_errors, dtype=float)) + self.eps
        self.max_priority = max(self.max_priority, float(p.max()))
        self.tree.update(idx, p**self.alpha)
