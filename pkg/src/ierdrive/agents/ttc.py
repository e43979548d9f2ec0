"""Rule-based time-to-collision baseline."""
from __future__ import annotations

import math
from typing import Iterable, Tuple

import numpy as np

from ..config import TTCConfig
from ..env import Action


def time_to_reach(distance: float, v: float, accel: float = 3.0, v_cap: float = 50 / 3.6) -> float:
    """Seconds to cover ``distance`` accelerating at ``accel`` until ``v_cap``
    and cruising afterwards."""
    if distance <= 0:
        return 0.0
    if v >= v_cap or accel <= 0:
        return distance / v if v > 0 else math.inf
    t_cap = (v_cap - v) / accel
    d_cap = v * t_cap + 0.5 * accel * t_cap**2
    if distance <= d_cap:
        return (-v + math.sqrt(v * v + 2 * accel * distance)) / accel
    return t_cap + (distance - d_cap) / v_cap


def ttc_policy(pairs: Iterable[Tuple[float, float]], v: float, cfg: TTCConfig = TTCConfig()) -> Action:
    """Go when every |tto - tto_ego| exceeds the threshold, brake otherwise.

    ``pairs`` holds (tto of the crossing traffic, tto of the ego) per
    conflict, both in seconds.
    """
    clear = all(abs(tto - tto_ego) > cfg.threshold for tto, tto_ego in pairs)
    if not clear:
        return Action.DECELERATE
    return Action.ACCELERATE if v < cfg.v_cap else Action.MAINTAIN


class TTCAgent:
    """Reads unclamped timings straight from the environment's (perception
    filtered) view; the ego time assumes constant acceleration."""

    name = "ttc"

    def __init__(self, cfg: TTCConfig | None = None, accel: float = 3.0):
        self.cfg = cfg or TTCConfig()
        self.accel = accel

    def act(self, obs: np.ndarray, env) -> Action:
        v = env.world.ego.v
        pairs = [
            (tto, time_to_reach(d, v, self.accel, self.cfg.v_cap))
            for tto, d in env.conflict_timings()
        ]
        return ttc_policy(pairs, v, self.cfg)


class RandomAgent:
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def reset(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def act(self, obs: np.ndarray, env) -> Action:
        return Action(int(self.rng.integers(3)))


class ConstantAgent:
    def __init__(self, action: Action):
        self.action = Action(action)
        self.name = self.action.name.lower()

    def act(self, obs: np.ndarray, env) -> Action:
        return self.action
