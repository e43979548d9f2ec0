"""Invariant environment representation (IER).

The ego's future path is cut into ``n_patches`` one-meter patches starting
at the ego front. Every patch carries five channels:

    tto       time until other traffic occupies the patch
    ttv       time until that traffic (or its union) has left it again
    tto_next  time until the next traffic after the union arrives
    tto_ego   time until the ego reaches the patch at its current speed
    i_int     1 on the first patch of a conflict region (optional channel)

Time channels are clamped to ``t_max`` and scaled to [0, 1]; 1.0 means
"nothing within the horizon". All inputs are arc coordinates, so the frame
does not depend on the road layout in the plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .config import EnvConfig
from .geometry import CROSSING, ConflictRegion, OccluderPolygon, pose_at, visibility_shadow
from .traffic import VehicleState

CHANNELS = ("tto", "ttv", "tto_next", "tto_ego", "i_int")
TTO, TTV, TTO_NEXT, TTO_EGO, I_INT = range(5)


def compute_tto(s_start: float, v: float) -> float:
    """Seconds until the vehicle front reaches a region ``s_start`` ahead."""
    if s_start < 0:
        raise ValueError("s_start must be non-negative")
    if v <= 0:
        return math.inf
    return s_start / v


def compute_ttv(s_end: float, v: float) -> float:
    """Seconds until the vehicle rear has cleared a region; ``s_end`` runs to
    the far edge of the region and includes the vehicle length."""
    if s_end < 0:
        raise ValueError("s_end must be non-negative")
    if v <= 0:
        return math.inf
    return s_end / v


def normalize_time(t: float, t_max: float = 10.0) -> float:
    return min(t, t_max) / t_max


class Union(NamedTuple):
    tto: float
    ttv: float
    tto_next: float


def union_gap_threshold(v_ego: float, ego_length: float = 5.0, margin: float = 1.0) -> float:
    """Smallest time gap the ego can use: its own length plus ``margin``
    clearance at both ends, traversed at the current speed (>= 1 m/s)."""
    return (ego_length + 2.0 * margin) / max(v_ego, 1.0)


def merge_unions(occupancies: Sequence[Tuple[float, float]], gap_threshold: float) -> List[Union]:
    """Fuse occupancies whose gaps are too short to pass through.

    ``occupancies`` are (tto, ttv) pairs sorted by tto. Consecutive entries
    join a union while the next tto starts less than ``gap_threshold`` after
    the union's current ttv.

    >>> merge_unions([(2, 3), (6, 7)], 0.5)
    [Union(tto=2, ttv=3, tto_next=6), Union(tto=6, ttv=7, tto_next=inf)]
    """
    for (a, _), (b, _) in zip(occupancies, occupancies[1:]):
        if b < a:
            raise ValueError("occupancies must be sorted by tto")
    groups: List[List[float]] = []
    for tto, ttv in occupancies:
        if groups and tto - groups[-1][1] < gap_threshold:
            groups[-1][1] = max(groups[-1][1], ttv)
        else:
            groups.append([tto, ttv])
    return [
        Union(g[0], g[1], groups[i + 1][0] if i + 1 < len(groups) else math.inf)
        for i, g in enumerate(groups)
    ]


# -- occlusion ----------------------------------------------------------------


def phantoms_from_occlusion(
    occluded: Dict[str, List[Tuple[float, float]]],
    speed_limit: float,
    width: float = 1.8,
) -> List[VehicleState]:
    """One worst-case vehicle per hidden lane interval: it fills the whole
    interval and drives at the speed limit."""
    phantoms = []
    for path_id, intervals in occluded.items():
        for a, b in intervals:
            if b > a:
                phantoms.append(VehicleState(path_id, b, speed_limit, b - a, width, phantom=True))
    return phantoms


def occluded_lanes(
    scenario,
    ego: VehicleState,
    occluders: Sequence[OccluderPolygon],
    cfg: EnvConfig,
) -> Dict[str, List[Tuple[float, float]]]:
    """Hidden stretches of every lane that feeds a conflict, seen from the
    ego front. Only the part upstream of the conflict is inspected."""
    if not occluders:
        return {}
    ego_pos, _ = pose_at(scenario.ego_path, min(max(ego.s_front, 0.0), scenario.ego_path.length))
    out = {}
    for pid, regions in scenario.conflicts().items():
        if not regions or pid == scenario.ego_route.path:
            continue
        u_lo = min(r.u_a for r in regions)
        u_hi = max(r.u_b for r in regions if r.kind == CROSSING) if any(
            r.kind == CROSSING for r in regions
        ) else u_lo
        span = (u_lo - cfg.shadow_lookback, u_hi)
        shadow = visibility_shadow(ego_pos, occluders, scenario.paths[pid], cfg.shadow_step, span)
        if shadow:
            out[pid] = shadow
    return out


def perceive(
    scenario,
    traffic: Iterable[VehicleState],
    ego: VehicleState,
    occluders: Sequence[OccluderPolygon],
    cfg: EnvConfig,
) -> List[VehicleState]:
    """The agent's view: vehicles fully inside a shadow are removed and every
    shadow is filled with a phantom."""
    traffic = list(traffic)
    hidden = occluded_lanes(scenario, ego, occluders, cfg)
    if not hidden:
        return traffic
    visible = [
        v
        for v in traffic
        if not any(a <= v.s_rear and v.s_front <= b for a, b in hidden.get(v.path_id, ()))
    ]
    return visible + phantoms_from_occlusion(hidden, scenario.speed_limit, cfg.vehicle_width)


# -- frame --------------------------------------------------------------------


class Patch(NamedTuple):
    tto: float
    ttv: float
    tto_next: float
    tto_ego: float
    i_int: float


@dataclass
class IERFrame:
    """``data`` holds one row per patch, columns as in :data:`CHANNELS`."""

    data: np.ndarray

    @property
    def patches(self) -> List[Patch]:
        return [Patch(*map(float, row)) for row in self.data]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CHANNELS.index(name)]

    def __eq__(self, other) -> bool:
        return isinstance(other, IERFrame) and np.array_equal(self.data, other.data)


def flatten(frame: IERFrame, include_ibit: bool) -> np.ndarray:
    """Patch-major observation vector: 4 (or 5 with the intersection bit)
    values per patch."""
    n = 5 if include_ibit else 4
    return frame.data[:, :n].reshape(-1).copy()


def unflatten(vector: np.ndarray, include_ibit: bool) -> IERFrame:
    n = 5 if include_ibit else 4
    vector = np.asarray(vector, dtype=float)
    if vector.size % n:
        raise ValueError(f"observation length {vector.size} is not a multiple of {n}")
    data = np.zeros((vector.size // n, 5))
    data[:, :n] = vector.reshape(-1, n)
    return IERFrame(data)


def observation_size(include_ibit: bool, n_patches: int = 50) -> int:
    return n_patches * (5 if include_ibit else 4)


def _crossing_occupancy(veh: VehicleState, r: ConflictRegion):
    s_end = r.u_b - veh.s_rear
    if s_end <= 0:
        return None
    s_start = max(0.0, r.u_a - veh.s_front)
    return compute_tto(s_start, veh.v), compute_ttv(s_end, veh.v)


def _same_path_vehicles(vehicles, r: ConflictRegion, s0: float):
    """Vehicles mapped into ego arc coordinates (front, rear, speed); the ones
    that are behind the ego on the shared stretch are dropped."""
    out = []
    for veh in vehicles:
        front = r.s_a + (veh.s_front - r.u_a)
        if front > s0 or s0 < r.s_a:
            out.append((front, front - veh.length, veh.v))
    return out


def _patch_occupancy(front, rear, v, p0, p1):
    if rear >= p1:
        return None
    if front > p0:
        return 0.0, compute_ttv(p1 - rear, v)
    return compute_tto(p0 - front, v), compute_ttv(p1 - rear, v)


def encode(
    vehicles: Sequence[VehicleState],
    ego: VehicleState,
    conflicts: Dict[str, List[ConflictRegion]],
    route_end: float,
    include_ibit: bool = False,
    cfg: EnvConfig | None = None,
) -> IERFrame:
    """Build the frame for the ego at ``ego.s_front``.

    ``vehicles`` is the perceived traffic (phantoms included); ``conflicts``
    maps each traffic path to its regions against the ego path. Crossing
    regions write only their first patch; shared-path regions write every
    patch the traffic covers or will cover. Where several sources reach one
    patch the one with the earliest tto wins.
    """
    cfg = cfg or EnvConfig()
    n, plen, t_max = cfg.n_patches, cfg.patch_len, cfg.t_max
    s0 = ego.s_front
    data = np.ones((n, 5))
    data[:, I_INT] = 0.0
    best = np.full(n, math.inf)
    raw = np.full((n, 3), math.inf)
    gap = union_gap_threshold(ego.v, ego.length, cfg.union_margin)
    n_valid = int(min(n, max(0, math.ceil((route_end - s0) / plen))))

    by_path: Dict[str, List[VehicleState]] = {}
    for veh in vehicles:
        by_path.setdefault(veh.path_id, []).append(veh)

    def offer(k, unions):
        if unions and unions[0].tto < best[k]:
            best[k] = unions[0].tto
            raw[k] = unions[0]

    for pid, regions in conflicts.items():
        vehs = by_path.get(pid, [])
        for r in regions:
            first = int(math.floor((r.s_a - s0) / plen))
            if include_ibit and r.s_a >= s0 and first < n_valid:
                data[first, I_INT] = 1.0
            if not vehs:
                continue
            if r.kind == CROSSING:
                if r.s_b <= s0:
                    continue
                k = max(first, 0)
                if k >= n_valid:
                    continue
                occ = [o for o in (_crossing_occupancy(v, r) for v in vehs) if o is not None]
                offer(k, merge_unions(sorted(occ), gap))
            else:
                mapped = _same_path_vehicles(vehs, r, s0)
                if not mapped:
                    continue
                k_lo = max(first, 0)
                k_hi = min(n_valid, int(math.ceil((r.s_b - s0) / plen)))
                for k in range(k_lo, k_hi):
                    p0 = max(s0 + k * plen, r.s_a)
                    p1 = min(s0 + (k + 1) * plen, r.s_b)
                    if p1 <= p0:
                        continue
                    occ = [o for o in (_patch_occupancy(f, b, v, p0, p1) for f, b, v in mapped) if o]
                    offer(k, merge_unions(sorted(occ), gap))

    hit = np.isfinite(best)
    data[hit, :3] = np.minimum(raw[hit], t_max) / t_max
    if ego.v > 0:
        dist = np.arange(n) * plen
        with np.errstate(over="ignore"):  # subnormal speeds give inf, clamped below
            data[:, TTO_EGO] = np.minimum(dist / ego.v, t_max) / t_max
    data[n_valid:, :4] = 1.0
    data[n_valid:, I_INT] = 0.0
    return IERFrame(data)


# -- raw timings for rule-based agents ---------------------------------------


def conflict_timings(
    vehicles: Sequence[VehicleState],
    ego: VehicleState,
    conflicts: Dict[str, List[ConflictRegion]],
    cfg: EnvConfig | None = None,
) -> List[Tuple[float, float]]:
    """Unclamped (tto seconds, ego distance meters) per conflict ahead.

    Each conflict yields the tto of its earliest union and, when present, of
    the union after it (the frame's tto and tto_next on the first patch). A shared-path region also yields
    the nearest vehicle already ahead of the ego on it (tto 0 at its rear).
    """
    cfg = cfg or EnvConfig()
    s0 = ego.s_front
    gap = union_gap_threshold(ego.v, ego.length, cfg.union_margin)
    out = []
    by_path: Dict[str, List[VehicleState]] = {}
    for veh in vehicles:
        by_path.setdefault(veh.path_id, []).append(veh)
    for pid, regions in conflicts.items():
        vehs = by_path.get(pid, [])
        if not vehs:
            continue
        for r in regions:
            if r.kind == CROSSING:
                if r.s_a < s0:
                    continue
                occ = [o for o in (_crossing_occupancy(v, r) for v in vehs) if o is not None]
                unions = merge_unions(sorted(occ), gap)
                out.extend((u.tto, r.s_a - s0) for u in unions[:2])
                continue
            if r.s_b <= s0:
                continue
            mapped = _same_path_vehicles(vehs, r, s0)
            p0 = max(r.s_a, s0)
            p1 = min(p0 + cfg.patch_len, r.s_b)
            occ = [o for o in (_patch_occupancy(f, b, v, p0, p1) for f, b, v in mapped) if o]
            unions = merge_unions(sorted(occ), gap)
            out.extend((u.tto, p0 - s0) for u in unions[:2])
            ahead = [b for f, b, v in mapped if b >= p1]
            if ahead:
                out.append((0.0, min(ahead) - s0))
    return out
