"""Episodic environment around the traffic world: reset/step, reward and
observation assembly."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import traffic
from .config import EnvConfig
from .encoder import IERFrame, conflict_timings, encode, flatten, observation_size, perceive
from .scenarios import ScenarioError, ScenarioSpec
from .traffic import VehicleState, WorldState

RUNNING = "running"
TIMEOUT = "timeout"


class Action(enum.IntEnum):
    ACCELERATE = 0
    MAINTAIN = 1
    DECELERATE = 2

    def accel(self, magnitude: float = 3.0) -> float:
        return (magnitude, 0.0, -magnitude)[self]


@dataclass(frozen=True)
class RewardWeights:
    k_c: float = 115.0
    k_v_upper: float = 0.03
    k_v_lower: float = 0.01
    k_a: float = 0.002
    v_upper: float = 130 / 9
    v_lower: float = 120 / 9

    @classmethod
    def from_config(cls, cfg: EnvConfig) -> "RewardWeights":
        return cls(cfg.k_c, cfg.k_v_upper, cfg.k_v_lower, cfg.k_a, cfg.v_upper, cfg.v_lower)


def reward(v: float, accel: float, collided: bool, w: RewardWeights = RewardWeights()) -> float:
    """r = r_collision(s') + r_velocity(s) + r_acceleration(a).

    ``v`` is the speed before the step, ``collided`` flags a collision or
    near-collision after it.
    """
    r = -w.k_c if collided else 0.0
    if v > w.v_upper:
        r -= w.k_v_upper * abs(v - w.v_upper)
    elif v < w.v_lower:
        r -= w.k_v_lower * abs(v - w.v_lower)
    return r - w.k_a * abs(accel)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: bool
    outcome: str


@dataclass
class TraceRow:
    t: float
    s: float
    v: float
    a: float
    reward: float
    outcome: str


class IntersectionEnv:
    """reset() -> observation, step(action) -> StepResult.

    >>> from ierdrive.scenarios import get_scenario
    >>> env = IntersectionEnv()
    >>> obs = env.reset(get_scenario("Sc02"), seed=0)
    >>> obs.shape
    (200,)
    """

    def __init__(self, cfg: Optional[EnvConfig] = None):
        self.cfg = cfg or EnvConfig()
        self.weights = RewardWeights.from_config(self.cfg)
        self.world: Optional[WorldState] = None
        self.scenario: Optional[ScenarioSpec] = None
        self.occluders = []
        self.include_ibit = False
        self.outcome = RUNNING
        self.trace: List[TraceRow] = []
        self._view: List[VehicleState] = []

    @property
    def observation_size(self) -> int:
        return observation_size(self.include_ibit, self.cfg.n_patches)

    def reset(
        self,
        scenario: ScenarioSpec,
        seed: int = 0,
        occlusions_enabled: bool = False,
        include_ibit: bool = False,
    ) -> np.ndarray:
        if not isinstance(scenario, ScenarioSpec):
            raise ScenarioError("reset needs a ScenarioSpec")
        scenario.validate()
        cfg = self.cfg
        self.scenario = scenario
        self.include_ibit = include_ibit
        self.conflicts = scenario.conflicts()
        rng = np.random.default_rng(seed)
        ego = VehicleState(
            scenario.ego_route.path,
            scenario.ego_route.start,
            cfg.v_init,
            cfg.vehicle_length,
            cfg.vehicle_width,
        )
        world = WorldState(scenario, ego, [], 0.0, 0, rng)

        # pre-roll so lanes hold steady-state traffic; the flow clock restarts after
        if scenario.flows:
            for _ in range(int(round(cfg.preroll / cfg.dt))):
                traffic.advance_traffic(world, cfg.dt)
                traffic.emit_traffic(world, -cfg.preroll, cfg)
        if scenario.leader is not None:
            traffic.place_leader(world, scenario.leader, cfg)

        self.occluders = []
        if occlusions_enabled:
            for side in scenario.sides:
                slots = [s for s in scenario.occluder_slots if s.side == side]
                self.occluders.append(slots[rng.integers(len(slots))].polygon)

        self.world = world
        self.outcome = RUNNING
        self.trace = [TraceRow(0.0, ego.s_front, ego.v, 0.0, 0.0, RUNNING)]
        return self._observe()

    def perceived(self) -> List[VehicleState]:
        return self._view

    def _observe(self) -> np.ndarray:
        w = self.world
        self._view = perceive(self.scenario, w.traffic, w.ego, self.occluders, self.cfg)
        self.frame = encode(
            self._view,
            w.ego,
            self.conflicts,
            self.scenario.ego_path.length,
            self.include_ibit,
            self.cfg,
        )
        return flatten(self.frame, self.include_ibit)

    def current_frame(self) -> IERFrame:
        return self.frame

    def conflict_timings(self):
        return conflict_timings(self._view, self.world.ego, self.conflicts, self.cfg)

    def step(self, action) -> StepResult:
        if self.world is None:
            raise RuntimeError("call reset() before step()")
        if self.outcome != RUNNING:
            raise RuntimeError("episode already terminated; call reset()")
        cfg, w = self.cfg, self.world
        action = Action(int(action))
        accel = action.accel(cfg.accel)
        v_before = w.ego.v

        traffic.advance_ego(w, accel, cfg.dt, cfg.v_max)
        t_prev = w.t
        traffic.advance_traffic(w, cfg.dt)
        w.step_index += 1
        w.t = w.step_index * cfg.dt
        traffic.emit_traffic(w, t_prev, cfg)
        if self.scenario.leader is not None:
            traffic.update_leader(w, self.scenario.leader, t_prev)

        outcome = traffic.detect_outcome(w, self.conflicts, cfg)
        collided = outcome in (traffic.COLLISION, traffic.NEAR_COLLISION)
        r = reward(v_before, accel, collided, self.weights)
        if outcome == traffic.NONE:
            outcome = TIMEOUT if w.step_index >= cfg.max_steps else RUNNING
        self.outcome = outcome
        obs = self._observe()
        self.trace.append(TraceRow(w.t, w.ego.s_front, w.ego.v, accel, r, outcome))
        return StepResult(obs, r, outcome != RUNNING, outcome)

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t", "s", "v", "a", "reward", "outcome"])
            for row in self.trace:
                out.writerow(
                    [f"{row.t:.1f}", f"{row.s:.4f}", f"{row.v:.4f}", f"{row.a:.1f}", f"{row.reward:.6f}", row.outcome]
                )
