"""Discrete-time traffic world: flow emission, constant-velocity traffic that
ignores the ego, ego longitudinal kinematics and outcome detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import EnvConfig
from .geometry import CROSSING, ConflictRegion, poses_at
from .scenarios import FlowSpec, LeaderSpec, ScenarioSpec

NONE = "none"
COLLISION = "collision"
NEAR_COLLISION = "near_collision"
SUCCESS = "success"


@dataclass(slots=True)
class VehicleState:
    path_id: str
    s_front: float
    v: float
    length: float = 5.0
    width: float = 1.8
    phantom: bool = False
    leader: bool = False

    @property
    def s_rear(self) -> float:
        return self.s_front - self.length


@dataclass
class WorldState:
    scenario: ScenarioSpec
    ego: VehicleState
    traffic: List[VehicleState] = field(default_factory=list)
    t: float = 0.0
    step_index: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def vehicles_on(self, path_id: str) -> List[VehicleState]:
        return [v for v in self.traffic if v.path_id == path_id]


def step_probability(p_sec: float, dt: float) -> float:
    """Per-step emission probability preserving a per-second probability."""
    return 1.0 - (1.0 - p_sec) ** dt


def spawn_step(
    flow: FlowSpec,
    t: float,
    dt: float,
    rng: np.random.Generator,
    existing: Sequence[VehicleState] = (),
    length: float = 5.0,
    width: float = 1.8,
    headway: float = 8.0,
) -> Optional[VehicleState]:
    """Maybe emit one vehicle at the start of ``flow.path``.

    The reduced probability applies from ``flow.reduction_time`` on. One
    uniform draw is consumed per call, whether or not a vehicle appears.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_sec = flow.p_initial if t < flow.reduction_time else flow.p_reduced
    draw = rng.random()
    if draw >= step_probability(p_sec, dt):
        return None
    for other in existing:
        if other.s_rear < length + headway:
            return None
    return VehicleState(flow.path, length, flow.speed, length, width)


def advance_traffic(world: WorldState, dt: float) -> WorldState:
    """Move every traffic vehicle at its own constant speed; drop the ones
    whose rear has left their path. Traffic never reacts to the ego."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    paths = world.scenario.paths
    kept = []
    for veh in world.traffic:
        veh.s_front += veh.v * dt
        if veh.s_front <= paths[veh.path_id].length + veh.length:
            kept.append(veh)
    world.traffic = kept
    return world


def ego_kinematics(s: float, v: float, accel: float, dt: float, v_max: float):
    """Exact constant-acceleration update with speed clamped to [0, v_max]."""
    v_new = v + accel * dt
    if accel < 0 and v_new < 0:
        t_hit = v / -accel
        return s + v * t_hit + 0.5 * accel * t_hit**2, 0.0
    if accel > 0 and v_new > v_max:
        t_hit = max(0.0, (v_max - v) / accel)
        ds = v * t_hit + 0.5 * accel * t_hit**2 + v_max * (dt - t_hit)
        return s + ds, v_max
    return s + v * dt + 0.5 * accel * dt**2, v_new


def advance_ego(world: WorldState, accel: float, dt: float, v_max: float = 70 / 3.6) -> WorldState:
    world.ego.s_front, world.ego.v = ego_kinematics(world.ego.s_front, world.ego.v, accel, dt, v_max)
    return world


def emit_traffic(world: WorldState, t: float, cfg: EnvConfig) -> None:
    for flow in world.scenario.flows:
        new = spawn_step(
            flow,
            t,
            cfg.dt,
            world.rng,
            world.vehicles_on(flow.path),
            cfg.vehicle_length,
            cfg.vehicle_width,
            cfg.spawn_headway,
        )
        if new is not None:
            world.traffic.append(new)


def place_leader(world: WorldState, spec: LeaderSpec, cfg: EnvConfig) -> VehicleState:
    front = world.ego.s_front + spec.gap + cfg.vehicle_length
    speed = float(spec.speeds[world.rng.integers(len(spec.speeds))])
    leader = VehicleState(spec.path, front, speed, cfg.vehicle_length, cfg.vehicle_width, leader=True)
    world.traffic.append(leader)
    return leader


def update_leader(world: WorldState, spec: LeaderSpec, t_prev: float) -> None:
    """Resample the scripted leader's speed when an interval boundary is crossed."""
    period = spec.resample_interval
    if math.floor(world.t / period + 1e-9) == math.floor(t_prev / period + 1e-9):
        return
    for veh in world.traffic:
        if veh.leader:
            veh.v = float(spec.speeds[world.rng.integers(len(spec.speeds))])


# -- outcome detection --------------------------------------------------------


def footprint(path, veh: VehicleState) -> np.ndarray:
    pos, heading = poses_at(path, np.array([veh.s_front - 0.5 * veh.length]))
    return _rectangle(pos[0], float(heading[0]), veh.length, veh.width)


def _rectangle(center, heading, length, width):
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)])
    return local @ np.array([[c, s], [-s, c]]) + center


def rectangles_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals (touching is not
    overlapping)."""
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=0) - poly
        for ex, ey in edges[:2]:
            axis = np.array([-ey, ex])
            pa, pb = a @ axis, b @ axis
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


def _interval_gap(lo: float, hi: float, a: float, b: float) -> float:
    return max(a - hi, lo - b, 0.0)


def detect_outcome(
    world: WorldState,
    conflicts: Dict[str, List[ConflictRegion]],
    cfg: EnvConfig | None = None,
) -> str:
    """Classify the current world state.

    Precedence: collision > near_collision > success > none.
    """
    cfg = cfg or EnvConfig()
    scenario = world.scenario
    ego = world.ego
    ego_path = scenario.ego_path

    ego_box = None
    reach = ego.length + 1.0
    ego_pos = poses_at(ego_path, np.array([ego.s_front - 0.5 * ego.length]))[0][0]
    for veh in world.traffic:
        path = scenario.paths[veh.path_id]
        center = poses_at(path, np.array([veh.s_front - 0.5 * veh.length]))[0][0]
        if np.hypot(*(center - ego_pos)) > reach + veh.length:
            continue
        if ego_box is None:
            ego_box = footprint(ego_path, ego)
        if rectangles_overlap(ego_box, footprint(path, veh)):
            return COLLISION

    if _near_collision(world, conflicts, cfg):
        return NEAR_COLLISION
    if ego.s_front >= scenario.ego_route.goal:
        return SUCCESS
    return NONE


def _near_collision(world, conflicts, cfg: EnvConfig) -> bool:
    ego = world.ego
    e_lo, e_hi = ego.s_rear, ego.s_front
    for pid, regions in conflicts.items():
        vehicles = [v for v in world.traffic if v.path_id == pid]
        if not vehicles:
            continue
        for r in regions:
            if r.kind == CROSSING:
                if not (e_hi > r.s_a and e_lo < r.s_b):
                    continue
                for veh in vehicles:
                    if _interval_gap(veh.s_rear, veh.s_front, r.u_a, r.u_b) < cfg.near_clearance:
                        return True
            else:
                if not (r.s_a <= ego.s_front <= r.s_b):
                    continue
                for veh in vehicles:
                    rear = r.s_a + (veh.s_rear - r.u_a)
                    if rear < r.s_a or rear > r.s_b:
                        continue
                    gap = rear - ego.s_front
                    if 0.0 <= gap < cfg.near_gap:
                        return True
    return False
