"""Declarative scenario descriptions and the bundled Sc01-Sc13 library.

A scenario is a JSON document::

    {
      "name": "Sc02",
      "description": "...",
      "speed_limit": 13.89,
      "paths": {"ego": {"vertices": [[x, y], ...]}, "n0": {...}},
      "ego_route": {"path": "ego", "start": 0.5, "goal": 112.3},
      "flows": [{"path": "n0", "p_initial": 0.1, "p_reduced": 0.05,
                 "reduction_time": 30.0, "speed": 13.89}],
      "leader": {"path": "ego", "gap": 40.0, "speeds": [8.33],
                 "resample_interval": 10.0},          # optional
      "occluder_slots": [{"side": "left", "vertices": [[x, y], ...]}]
    }

Coordinates are meters, speeds m/s, times seconds. ``leader`` scripts a
single vehicle ahead of the ego (car following); it may be ``null``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .geometry import (
    CROSSING,
    SAME_PATH,
    ConflictRegion,
    OccluderPolygon,
    PolylinePath,
    conflict_regions,
)

SCENARIO_NAMES = tuple(f"Sc{i:02d}" for i in range(1, 14))
MIN_APPROACH = 100.0


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FlowSpec:
    path: str
    p_initial: float = 0.10
    p_reduced: float = 0.05
    reduction_time: float = 30.0
    speed: float = 50 / 3.6

    def __post_init__(self):
        for p in (self.p_initial, self.p_reduced):
            if not 0.0 <= p <= 1.0:
                raise ScenarioError(f"emission probability {p} outside [0, 1]")
        if self.reduction_time < 0:
            raise ScenarioError("reduction_time must be non-negative")
        if self.speed < 0:
            raise ScenarioError("flow speed must be non-negative")


@dataclass(frozen=True)
class LeaderSpec:
    path: str
    gap: float
    speeds: Tuple[float, ...]
    resample_interval: float = 10.0


@dataclass(frozen=True)
class EgoRoute:
    path: str
    start: float
    goal: float


@dataclass(frozen=True)
class OccluderSlot:
    side: str
    polygon: OccluderPolygon


@dataclass(eq=False)
class ScenarioSpec:
    name: str
    paths: Dict[str, PolylinePath]
    ego_route: EgoRoute
    flows: List[FlowSpec] = field(default_factory=list)
    leader: Optional[LeaderSpec] = None
    occluder_slots: List[OccluderSlot] = field(default_factory=list)
    speed_limit: float = 50 / 3.6
    description: str = ""
    _conflicts: Optional[Dict[str, List[ConflictRegion]]] = field(default=None, repr=False)

    @property
    def ego_path(self) -> PolylinePath:
        return self.paths[self.ego_route.path]

    @property
    def traffic_paths(self) -> List[str]:
        ids = [f.path for f in self.flows]
        if self.leader is not None:
            ids.append(self.leader.path)
        return list(dict.fromkeys(ids))

    @property
    def sides(self) -> List[str]:
        return sorted({slot.side for slot in self.occluder_slots})

    def conflicts(self) -> Dict[str, List[ConflictRegion]]:
        """Ego path vs. every traffic path, computed once and cached."""
        if self._conflicts is None:
            self._conflicts = {
                pid: conflict_regions(self.ego_path, self.paths[pid])
                for pid in self.traffic_paths
            }
        return self._conflicts

    def crossing_regions(self) -> List[ConflictRegion]:
        return sorted(
            (r for regs in self.conflicts().values() for r in regs if r.kind == CROSSING),
            key=lambda r: r.s_a,
        )

    def validate(self) -> None:
        if self.ego_route.path not in self.paths:
            raise ScenarioError(f"{self.name}: unknown ego path {self.ego_route.path!r}")
        for pid in self.traffic_paths:
            if pid not in self.paths:
                raise ScenarioError(f"{self.name}: unknown traffic path {pid!r}")
        ego_len = self.ego_path.length
        if not 0.0 <= self.ego_route.start < self.ego_route.goal <= ego_len:
            raise ScenarioError(f"{self.name}: ego route start/goal outside the ego path")
        if self.speed_limit <= 0:
            raise ScenarioError(f"{self.name}: speed limit must be positive")
        regions = self.crossing_regions()
        if regions:
            if regions[0].s_a - self.ego_route.start < MIN_APPROACH - 1e-9:
                raise ScenarioError(f"{self.name}: ego starts closer than 100 m to the junction")
            if self.ego_route.goal <= regions[-1].s_b:
                raise ScenarioError(f"{self.name}: goal must lie beyond the last conflict")
        for slot in self.occluder_slots:
            if slot.side not in ("left", "right"):
                raise ScenarioError(f"{self.name}: occluder side must be left or right")

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        def rnd(values):
            return [[round(float(x), 6), round(float(y), 6)] for x, y in values]

        return {
            "name": self.name,
            "description": self.description,
            "speed_limit": self.speed_limit,
            "paths": {pid: {"vertices": rnd(p.vertices)} for pid, p in self.paths.items()},
            "ego_route": {
                "path": self.ego_route.path,
                "start": self.ego_route.start,
                "goal": self.ego_route.goal,
            },
            "flows": [
                {
                    "path": f.path,
                    "p_initial": f.p_initial,
                    "p_reduced": f.p_reduced,
                    "reduction_time": f.reduction_time,
                    "speed": f.speed,
                }
                for f in self.flows
            ],
            "leader": None
            if self.leader is None
            else {
                "path": self.leader.path,
                "gap": self.leader.gap,
                "speeds": list(self.leader.speeds),
                "resample_interval": self.leader.resample_interval,
            },
            "occluder_slots": [
                {"side": s.side, "vertices": rnd(s.polygon.vertices)} for s in self.occluder_slots
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, width: float = 1.8) -> "ScenarioSpec":
        try:
            paths = {
                pid: PolylinePath(p["vertices"], float(p.get("width", width)))
                for pid, p in data["paths"].items()
            }
            route = data["ego_route"]
            leader = data.get("leader")
            spec = cls(
                name=data["name"],
                description=data.get("description", ""),
                speed_limit=float(data.get("speed_limit", 50 / 3.6)),
                paths=paths,
                ego_route=EgoRoute(route["path"], float(route["start"]), float(route["goal"])),
                flows=[FlowSpec(**f) for f in data.get("flows", [])],
                leader=None
                if leader is None
                else LeaderSpec(
                    leader["path"],
                    float(leader["gap"]),
                    tuple(float(v) for v in leader["speeds"]),
                    float(leader.get("resample_interval", 10.0)),
                ),
                occluder_slots=[
                    OccluderSlot(s["side"], OccluderPolygon(s["vertices"]))
                    for s in data.get("occluder_slots", [])
                ],
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario document: {exc}") from exc
        spec.validate()
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def transformed(self, angle: float, offset) -> "ScenarioSpec":
        """The same scenario under a rigid motion of the plane."""
        return ScenarioSpec(
            name=self.name,
            description=self.description,
            speed_limit=self.speed_limit,
            paths={pid: p.transformed(angle, offset) for pid, p in self.paths.items()},
            ego_route=self.ego_route,
            flows=list(self.flows),
            leader=self.leader,
            occluder_slots=[
                OccluderSlot(s.side, s.polygon.transformed(angle, offset))
                for s in self.occluder_slots
            ],
        )


def load_scenario(path: str | Path) -> ScenarioSpec:
    return ScenarioSpec.from_dict(json.loads(Path(path).read_text()))


@lru_cache(maxsize=None)
def _bundled(name: str) -> ScenarioSpec:
    ref = resources.files("ierdrive") / "data" / "scenarios" / f"{name}.json"
    if not ref.is_file():
        raise ScenarioError(f"unknown scenario {name!r}")
    return ScenarioSpec.from_dict(json.loads(ref.read_text()))


def get_scenario(name: str) -> ScenarioSpec:
    """A bundled scenario by name (``Sc01`` ... ``Sc13``) or a JSON file path."""
    if name in SCENARIO_NAMES:
        return _bundled(name)
    p = Path(name)
    if p.suffix == ".json" and p.is_file():
        return load_scenario(p)
    raise ScenarioError(f"unknown scenario {name!r}")


def scenario_library() -> Dict[str, ScenarioSpec]:
    return {name: get_scenario(name) for name in SCENARIO_NAMES}


def resolve_scenarios(arg: str) -> List[str]:
    if arg == "all":
        return list(SCENARIO_NAMES)
    names = [a.strip() for a in arg.split(",") if a.strip()]
    for n in names:
        get_scenario(n)
    return names


__all__ = [
    "SAME_PATH",
    "CROSSING",
    "EgoRoute",
    "FlowSpec",
    "LeaderSpec",
    "OccluderSlot",
    "ScenarioError",
    "ScenarioSpec",
    "SCENARIO_NAMES",
    "get_scenario",
    "load_scenario",
    "resolve_scenarios",
    "scenario_library",
]
