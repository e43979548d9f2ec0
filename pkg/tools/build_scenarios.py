"""Regenerate the bundled scenario files under src/ierdrive/data/scenarios.

Layouts: right-hand traffic, 3.5 m lanes, the ego approaching the (first)
junction from the west. Crossing lanes are perpendicular, curved approaches
use 90 deg arcs of radius 50 m, merges join at 30 deg, the Y junction arms
are 45 deg apart and the left turn uses a 12 m radius. Occluder slots are
12 m x 6 m blocks at the junction corners.

    python tools/build_scenarios.py
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ierdrive.geometry import CROSSING, SAME_PATH, OccluderPolygon, PolylinePath, conflict_regions
from ierdrive.geometry import _segment_polyline_distance
from ierdrive.scenarios import EgoRoute, FlowSpec, LeaderSpec, OccluderSlot, ScenarioSpec

OUT = Path(__file__).resolve().parents[1] / "src" / "ierdrive" / "data" / "scenarios"

LANE = 3.5
HALF = LANE / 2
WIDTH = 1.8
KMH = 1 / 3.6
V_CITY = 50 * KMH
V_SLOW = 30 * KMH
UPSTREAM = 220.0
DOWNSTREAM = 80.0
APPROACH = 100.5
ARC_STEP = math.radians(3.0)


def unit(deg):
    return np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])


def right_of(d):
    return np.array([d[1], -d[0]])


def fillet(points, radius):
    """Polyline through ``points`` with every interior corner rounded."""
    pts = [np.asarray(p, float) for p in points]
    out = [pts[0]]
    for prev, corner, nxt in zip(pts, pts[1:], pts[2:]):
        d1 = (corner - prev) / np.linalg.norm(corner - prev)
        d2 = (nxt - corner) / np.linalg.norm(nxt - corner)
        turn = math.atan2(d1[0] * d2[1] - d1[1] * d2[0], float(d1 @ d2))
        if abs(turn) < 1e-9:
            out.append(corner)
            continue
        t = radius * math.tan(abs(turn) / 2)
        a = corner - d1 * t
        normal = np.array([-d1[1], d1[0]]) * (1 if turn > 0 else -1)
        center = a + normal * radius
        start = math.atan2(*(a - center)[::-1])
        n = max(2, int(math.ceil(abs(turn) / ARC_STEP)))
        for k in range(n + 1):
            ang = start + turn * k / n
            out.append(center + radius * np.array([math.cos(ang), math.sin(ang)]))
    out.append(pts[-1])
    clean = [out[0]]
    for p in out[1:]:
        if np.linalg.norm(p - clean[-1]) > 1e-6:
            clean.append(p)
    return np.array(clean)


def line_intersection(p, d, q, e):
    den = d[0] * e[1] - d[1] * e[0]
    t = ((q - p)[0] * e[1] - (q - p)[1] * e[0]) / den
    return p + t * d


class Junction:
    """Arms radiating from ``center``; ``lanes[arm] = (n_in, n_out)``."""

    def __init__(self, center, arms):
        self.center = np.asarray(center, float)
        self.arms = {name: unit(deg) for name, deg in arms.items()}

    def lane_line(self, arm, inbound, index=0):
        a = self.arms[arm]
        off = (HALF + LANE * index) * right_of(a)
        return (self.center - off, -a) if inbound else (self.center + off, a)

    def route(self, arm_in, arm_out, lane_in=0, lane_out=0, radius=12.0, up=UPSTREAM, down=DOWNSTREAM):
        p, d = self.lane_line(arm_in, True, lane_in)
        q, e = self.lane_line(arm_out, False, lane_out)
        start = p - d * up
        end = q + e * down
        if abs(d[0] * e[1] - d[1] * e[0]) < 1e-9:
            return np.array([start, end])
        corner = line_intersection(p, d, q, e)
        return fillet([start, corner, end], radius)


def trim_front(vertices, amount):
    """Drop ``amount`` meters from the start of a polyline."""
    v = np.asarray(vertices, float)
    d = v[1] - v[0]
    seg = np.linalg.norm(d)
    if amount >= seg - 0.1:
        raise ValueError("approach segment too short to trim")
    v = v.copy()
    v[0] = v[0] + d / seg * amount
    return v


def place_ego(paths, ego_vertices, traffic_ids):
    """Trim the ego approach so the first crossing begins 100.5 m out."""
    ego = PolylinePath(ego_vertices, WIDTH)
    starts = [
        r.s_a
        for pid in traffic_ids
        for r in conflict_regions(ego, paths[pid])
        if r.kind == CROSSING
    ]
    merges = [
        r.s_a
        for pid in traffic_ids
        for r in conflict_regions(ego, paths[pid])
        if r.kind == SAME_PATH and r.s_a > 1.0
    ]
    first = min(starts + merges)
    return trim_front(ego_vertices, first - APPROACH)


def goal_for(ego, paths, traffic_ids):
    crossing_end, merge_start = 0.0, 0.0
    for pid in traffic_ids:
        for r in conflict_regions(ego, paths[pid]):
            if r.kind == CROSSING:
                crossing_end = max(crossing_end, r.s_b)
            elif r.s_a > 1.0:
                merge_start = max(merge_start, r.s_a)
    goal = max(crossing_end + 6.0, merge_start + 40.0 if merge_start else 0.0)
    return round(goal, 2)


def corner_slots(center, half_cross, half_ego=LANE, gap=2.0):
    """Four 12 x 6 blocks in the corners of a perpendicular junction."""
    cx, cy = center
    dx = half_cross + gap + 6.0
    dy = half_ego + gap + 3.0
    slots = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            side = "left" if sy > 0 else "right"
            slots.append(OccluderSlot(side, OccluderPolygon.rectangle((cx + sx * dx, cy + sy * dy), 12.0, 6.0)))
    return slots


def check_slots(name, paths, slots, margin=0.5):
    for slot in slots:
        v = slot.polygon.vertices
        a, b = v, np.roll(v, -1, axis=0)
        for pid, p in paths.items():
            dist, _, _ = _segment_polyline_distance(a, b, p)
            inside = _contains(v, p.vertices)
            if dist.min() < 0.5 * p.width + margin or inside:
                raise ValueError(f"{name}: occluder slot touches path {pid}")


def _contains(poly, pts):
    e = np.roll(poly, -1, axis=0) - poly
    rel = pts[:, None, :] - poly[None, :, :]
    cr = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
    return bool(np.any(np.all(cr > 0, axis=1)))


def build(name, description, ego_vertices, traffic, slots=(), speed=V_CITY, leader=None, goal=None):
    paths = {pid: PolylinePath(v, WIDTH) for pid, v in traffic.items()}
    ids = list(traffic)
    if leader is None:
        ego_vertices = place_ego(paths, ego_vertices, ids)
    ego = PolylinePath(ego_vertices, WIDTH)
    paths = {"ego": ego, **paths}
    ids = [pid for pid in ids if conflict_regions(ego, paths[pid])]
    paths = {pid: p for pid, p in paths.items() if pid == "ego" or pid in ids}
    if goal is None:
        goal = goal_for(ego, paths, ids)
    flows = [FlowSpec(pid, 0.10, 0.05, 30.0, speed) for pid in ids]
    check_slots(name, paths, slots)
    spec = ScenarioSpec(
        name=name,
        description=description,
        speed_limit=V_CITY,
        paths=paths,
        ego_route=EgoRoute("ego", 0.0, goal),
        flows=flows,
        leader=leader,
        occluder_slots=list(slots),
    )
    spec.validate()
    return spec


def four_way(center, n_cross_in, n_cross_out=None):
    """Crossing road lanes (north- and southbound) through ``center``."""
    n_cross_out = n_cross_in if n_cross_out is None else n_cross_out
    j = Junction(center, {"W": 180, "E": 0, "N": 90, "S": 270})
    lanes = {}
    for i in range(n_cross_in):
        lanes[f"{_tag(center)}nb{i}"] = j.route("S", "N", i, i)
    for i in range(n_cross_out):
        lanes[f"{_tag(center)}sb{i}"] = j.route("N", "S", i, i)
    return j, lanes


def _tag(center):
    return "" if abs(center[0]) < 1e-9 else f"j{int(center[0])}_"


def straight_ego(x_end=200.0):
    return np.array([[-400.0, -HALF], [x_end, -HALF]])


def curved_ego(first_lane_x, x_end=200.0, radius=50.0, straight=21.46):
    x_c = first_lane_x - 0.9 - straight - radius
    pts = [(x_c, -HALF - 300.0), (x_c, -HALF), (x_end, -HALF)]
    return fillet(pts, radius)


def scenarios():
    out = []

    ego = np.array([[0.0, -HALF], [520.0, -HALF]])
    out.append(build(
        "Sc01", "car following behind a leader with piecewise-constant speed",
        ego, {}, leader=LeaderSpec("ego", 40.0, (30 * KMH, 40 * KMH, 50 * KMH), 10.0), goal=300.0,
    ))

    _, lanes = four_way((0.0, 0.0), 1)
    out.append(build("Sc02", "crossing, one lane per direction", straight_ego(), lanes,
                     corner_slots((0, 0), LANE)))

    _, lanes = four_way((0.0, 0.0), 1)
    out.append(build("Sc03", "crossing, one lane per direction, curved approach",
                     curved_ego(-HALF), lanes, corner_slots((0, 0), LANE)))

    j, lanes = four_way((0.0, 0.0), 1)
    lanes["wb0"] = j.route("E", "W")
    ego = j.route("W", "N", radius=12.0, up=400.0, down=120.0)
    out.append(build("Sc04", "left turn, one lane per direction", ego, lanes,
                     corner_slots((0, 0), LANE)))

    out.append(merge("Sc05", "merge onto a single lane road", V_CITY))

    out.append(merge("Sc06", "merge followed by a crossing", V_CITY, with_crossing=True))

    _, lanes = four_way((0.0, 0.0), 3)
    out.append(build("Sc07", "crossing, three lanes per direction", straight_ego(), lanes,
                     corner_slots((0, 0), 3 * LANE)))

    _, lanes = four_way((0.0, 0.0), 3)
    out.append(build("Sc08", "crossing, three lanes per direction, curved approach",
                     curved_ego(-HALF - 2 * LANE), lanes, corner_slots((0, 0), 3 * LANE)))

    _, lanes = four_way((0.0, 0.0), 3)
    _, lanes2 = four_way((60.0, 0.0), 3)
    lanes.update(lanes2)
    out.append(build("Sc09", "two consecutive three-lane crossings 60 m apart", straight_ego(), lanes,
                     corner_slots((0, 0), 3 * LANE) + corner_slots((60, 0), 3 * LANE)))

    out.append(build(
        "Sc10", "car following behind a slow leader",
        np.array([[0.0, -HALF], [520.0, -HALF]]), {},
        leader=LeaderSpec("ego", 40.0, (V_SLOW,), 10.0), goal=300.0,
    ))

    out.append(merge("Sc11", "merge onto a single lane road with slow traffic", V_SLOW))

    j = Junction((0.0, 0.0), {"W": 180, "NE": 45, "SE": -45})
    lanes = {
        "se_w": j.route("SE", "W", radius=15.0),
        "se_ne": j.route("SE", "NE", radius=15.0),
        "ne_se": j.route("NE", "SE", radius=15.0),
        "ne_w": j.route("NE", "W", radius=15.0),
    }
    ego = j.route("W", "NE", radius=25.0, up=400.0, down=120.0)
    y_slots = [
        OccluderSlot("left", OccluderPolygon.rectangle(18.0 * unit(112.5), 12.0, 6.0, math.radians(112.5 + 90))),
        OccluderSlot("right", OccluderPolygon.rectangle(18.0 * unit(-112.5), 12.0, 6.0, math.radians(-112.5 + 90))),
        OccluderSlot("right", OccluderPolygon.rectangle(20.0 * unit(0.0), 12.0, 6.0, math.radians(90))),
    ]
    out.append(build("Sc12", "Y-shaped junction, one lane per direction", ego, lanes, y_slots))

    # two lanes from the top (southbound) and one from the bottom (northbound)
    _, lanes = four_way((0.0, 0.0), 1, 2)
    out.append(build("Sc13", "crossing with two lanes from the top and one from the bottom",
                     straight_ego(), lanes, corner_slots((0, 0), 2.5 * LANE)))
    return out


def merge(name, description, speed, with_crossing=False):
    j = Junction((0.0, 0.0), {"W": 180, "E": 0, "SW": 210})
    main = j.route("W", "E", up=UPSTREAM, down=140.0)
    # ramp joins the eastbound lane at a 30 deg angle
    p = np.array([0.0, -HALF])
    ego = fillet([p + unit(210) * 300.0, p, p + unit(0) * 200.0], 40.0)
    lanes = {"main": main}
    slots = [
        OccluderSlot("left", OccluderPolygon.rectangle((-32.0, -9.5), 12.0, 6.0)),
        OccluderSlot("left", OccluderPolygon.rectangle((-52.0, -15.0), 12.0, 6.0, math.radians(15))),
        OccluderSlot("right", OccluderPolygon.rectangle((-20.0, -30.0), 12.0, 6.0, math.radians(30))),
    ]
    if with_crossing:
        _, cross = four_way((60.0, 0.0), 1)
        lanes.update(cross)
        slots += corner_slots((60, 0), LANE)
    return build(name, description, ego, lanes, slots, speed=speed)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for spec in scenarios():
        spec.save(OUT / f"{spec.name}.json")
        regions = spec.conflicts()
        summary = ", ".join(
            f"{pid}:{r.kind[0]}[{r.s_a:.1f},{r.s_b:.1f}]" for pid, rs in regions.items() for r in rs
        )
        print(f"{spec.name}: goal={spec.ego_route.goal:.1f} len={spec.ego_path.length:.1f} {summary}")


if __name__ == "__main__":
    main()
