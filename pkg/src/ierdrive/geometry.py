"""Planar path geometry: arc-length parameterized polylines, corridor
conflicts between driving paths and line-of-sight shadows cast on lanes.

Everything downstream works in arc coordinates along these paths, so the
functions here only ever hand back arc intervals, never Cartesian data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

RASTER_CELL = 0.05
SHADOW_STEP = 0.5
SAME_PATH_MIN_LENGTH = 5.0
SAME_PATH_MAX_HEADING = math.radians(15.0)

CROSSING = "crossing"
SAME_PATH = "same_path"


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolylinePath:
    """A driving path: an ordered polyline with a corridor width.

    ``cum_length[i]`` is the arc length at ``vertices[i]``.
    """

    vertices: np.ndarray
    width: float = 1.8
    cum_length: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise GeometryError("a path needs at least two 2D vertices")
        seg = np.hypot(*np.diff(v, axis=0).T)
        if np.any(seg <= 0.0):
            raise GeometryError("consecutive path vertices must be distinct")
        if self.width <= 0:
            raise GeometryError("path width must be positive")
        v.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cum_length", cum)

    @property
    def length(self) -> float:
        return float(self.cum_length[-1])

    @property
    def segment_headings(self) -> np.ndarray:
        d = np.diff(self.vertices, axis=0)
        return np.arctan2(d[:, 1], d[:, 0])

    def transformed(self, angle: float, offset: Sequence[float]) -> "PolylinePath":
        return PolylinePath(rigid_transform(self.vertices, angle, offset), self.width)

    def with_width(self, width: float) -> "PolylinePath":
        return PolylinePath(self.vertices, width)


def rigid_transform(points, angle: float, offset: Sequence[float]) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(points, dtype=float) @ rot.T + np.asarray(offset, dtype=float)


def _locate(path: PolylinePath, s: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(path.cum_length, s, side="right") - 1
    return np.clip(idx, 0, len(path.vertices) - 2)


def poses_at(path: PolylinePath, s) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`pose_at` without domain checks: positions (n, 2)
    and headings (n,). Arc positions outside the path extrapolate along the
    first/last segment."""
    s = np.asarray(s, dtype=float)
    idx = _locate(path, s)
    p0 = path.vertices[idx]
    d = path.vertices[idx + 1] - p0
    seg_len = path.cum_length[idx + 1] - path.cum_length[idx]
    frac = (s - path.cum_length[idx]) / seg_len
    pos = p0 + d * frac[..., None]
    return pos, np.arctan2(d[..., 1], d[..., 0])


def pose_at(path: PolylinePath, s: float) -> Tuple[np.ndarray, float]:
    """Position and heading at arc length ``s``.

    >>> p = PolylinePath([(0, 0), (10, 0), (10, 10)])
    >>> pos, heading = pose_at(p, 15.0)
    >>> pos.tolist(), round(heading, 6)
    ([10.0, 5.0], 1.570796)
    """
    if not (0.0 <= s <= path.length):
        raise GeometryError(f"arc position {s} outside [0, {path.length}]")
    pos, heading = poses_at(path, np.array([s]))
    return pos[0], float(heading[0])


# -- distance kernels ---------------------------------------------------------


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _point_segment(px, py, ax, ay, bx, by):
    """Distance and clamped parameter of the closest point on segment ab."""
    dx, dy = bx - ax, by - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(ax + t * dx - px, ay + t * dy - py), t


def _segment_polyline_distance(p0: np.ndarray, p1: np.ndarray, path: PolylinePath):
    """Distance from each segment (p0[i], p1[i]) to ``path``.

    Returns the distance, the arc coordinate on ``path`` of the closest
    point and the index of the path segment it lies on.
    """
    q = path.vertices
    qa, qb = q[:-1], q[1:]
    ax, ay = p0[:, 0:1], p0[:, 1:2]
    bx, by = p1[:, 0:1], p1[:, 1:2]
    cx, cy = qa[None, :, 0], qa[None, :, 1]
    ex, ey = qb[None, :, 0], qb[None, :, 1]

    d1, t1 = _point_segment(ax, ay, cx, cy, ex, ey)
    d2, t2 = _point_segment(bx, by, cx, cy, ex, ey)
    d3, _ = _point_segment(cx, cy, ax, ay, bx, by)
    d4, _ = _point_segment(ex, ey, ax, ay, bx, by)
    dist = np.minimum(np.minimum(d1, d2), np.minimum(d3, d4))
    # parameter along the path segment of the closest approach
    t = np.where(d1 <= d2, t1, t2)
    t = np.where(d3 < np.minimum(d1, d2), 0.0, t)
    t = np.where(d4 < np.minimum(np.minimum(d1, d2), d3), 1.0, t)

    # proper crossings have distance zero
    rx, ry = bx - ax, by - ay
    sx, sy = ex - cx, ey - cy
    denom = _cross(rx, ry, sx, sy)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = _cross(cx - ax, cy - ay, sx, sy) / denom
        tq = _cross(cx - ax, cy - ay, rx, ry) / denom
    hit = (denom != 0) & (tp >= 0) & (tp <= 1) & (tq >= 0) & (tq <= 1)
    dist = np.where(hit, 0.0, dist)
    t = np.where(hit, tq, t)

    k = np.argmin(dist, axis=1)
    rows = np.arange(len(p0))
    seg_len = np.diff(path.cum_length)
    u = path.cum_length[k] + t[rows, k] * seg_len[k]
    return dist[rows, k], u, k


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs of True as inclusive (start, end) index pairs."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def _cross_sections(path: PolylinePath, cell: float):
    n = max(int(math.floor(path.length / cell)), 1)
    s = (np.arange(n) + 0.5) * cell
    pos, heading = poses_at(path, s)
    normal = np.stack([-np.sin(heading), np.cos(heading)], axis=1)
    half = 0.5 * path.width
    return s, pos - half * normal, pos + half * normal, heading


def _corridor_hits(a: PolylinePath, b: PolylinePath, cell: float):
    s, p0, p1, heading = _cross_sections(a, cell)
    dist, u, k = _segment_polyline_distance(p0, p1, b)
    hit = dist <= 0.5 * b.width
    dh = np.abs(np.angle(np.exp(1j * (heading - b.segment_headings[k]))))
    return s, hit, u, dh


@dataclass(frozen=True)
class ConflictRegion:
    """Overlap of two corridors with the matching arc interval on each."""

    ego_interval: Tuple[float, float]
    other_interval: Tuple[float, float]
    kind: str = CROSSING

    @property
    def s_a(self) -> float:
        return self.ego_interval[0]

    @property
    def s_b(self) -> float:
        return self.ego_interval[1]

    @property
    def u_a(self) -> float:
        return self.other_interval[0]

    @property
    def u_b(self) -> float:
        return self.other_interval[1]

    def swapped(self) -> "ConflictRegion":
        return ConflictRegion(self.other_interval, self.ego_interval, self.kind)


def conflict_regions(
    ego: PolylinePath, other: PolylinePath, cell: float = RASTER_CELL
) -> List[ConflictRegion]:
    """All maximal overlaps between the corridors of ``ego`` and ``other``.

    Each path is rasterized along its arc at ``cell`` resolution: a cell is
    hit when its cross-section (one path width wide) comes within half the
    other path's width of the other centerline. Intervals are reported at
    cell edges. Regions sharing at least 5 m of near-parallel corridor are
    classified ``same_path`` (car following, merges).
    """
    s, hit, u_of_s, dh = _corridor_hits(ego, other, cell)
    t, hit_o, _, _ = _corridor_hits(other, ego, cell)
    other_runs = [(i * cell, (j + 1) * cell) for i, j in _runs(hit_o)]

    regions = []
    for i, j in _runs(hit):
        ego_iv = (i * cell, (j + 1) * cell)
        lo, hi = float(u_of_s[i : j + 1].min()), float(u_of_s[i : j + 1].max())
        matched = [r for r in other_runs if r[0] <= hi + cell and r[1] >= lo - cell]
        if matched:
            other_iv = (float(min(r[0] for r in matched)), float(max(r[1] for r in matched)))
        else:
            other_iv = (lo, hi)
        parallel = np.count_nonzero(dh[i : j + 1] < SAME_PATH_MAX_HEADING) * cell
        kind = SAME_PATH if parallel >= SAME_PATH_MIN_LENGTH else CROSSING
        regions.append(ConflictRegion(ego_iv, other_iv, kind))
    return regions


# -- occlusion ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OccluderPolygon:
    """Convex obstacle blocking line of sight; vertices stored CCW."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("an occluder needs at least three 2D vertices")
        x, y = v[:, 0], v[:, 1]
        area2 = float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
        if abs(area2) < 1e-9:
            raise GeometryError("degenerate occluder")
        if area2 < 0:
            v = v[::-1].copy()
        e = np.roll(v, -1, axis=0) - v
        turn = _cross(e[:, 0], e[:, 1], np.roll(e, -1, axis=0)[:, 0], np.roll(e, -1, axis=0)[:, 1])
        if np.any(turn < -1e-9):
            raise GeometryError("occluder must be convex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, center, length, width, heading=0.0) -> "OccluderPolygon":
        hl, hw = 0.5 * length, 0.5 * width
        local = np.array([(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)])
        return cls(rigid_transform(local, heading, center))

    def transformed(self, angle: float, offset) -> "OccluderPolygon":
        return OccluderPolygon(rigid_transform(self.vertices, angle, offset))

    def scaled(self, factor: float) -> "OccluderPolygon":
        c = self.vertices.mean(axis=0)
        return OccluderPolygon(c + factor * (self.vertices - c))


def segments_hit_polygon(a: np.ndarray, b: np.ndarray, poly: OccluderPolygon) -> np.ndarray:
    """Whether each open segment a->b(i) passes through the polygon interior
    (Cyrus-Beck clipping against the inward half-planes)."""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    normal = np.stack([e[:, 1], -e[:, 0]], axis=1)  # outward for CCW
    d = b - a
    # inside iff normal . (p - v_k) < 0 for every edge
    num = (v[None, :, :] - a[..., None, :]) * normal  # (n, k, 2)
    num = num.sum(axis=-1)
    den = d @ normal.T
    t_lo = np.zeros(len(d))
    t_hi = np.ones(len(d))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
    entering = den < 0
    leaving = den > 0
    t_lo = np.max(np.where(entering, t, 0.0), axis=1, initial=0.0)
    t_hi = np.min(np.where(leaving, t, 1.0), axis=1, initial=1.0)
    parallel_out = np.any((den == 0) & (num <= 0), axis=1)
    return (t_lo < t_hi) & ~parallel_out


def visibility_shadow(
    ego_pos,
    occluders: Iterable[OccluderPolygon],
    lane: PolylinePath,
    sample_step: float = SHADOW_STEP,
    span: Tuple[float, float] | None = None,
) -> List[Tuple[float, float]]:
    """Arc intervals of ``lane`` hidden from ``ego_pos`` by any occluder.

    The lane is sampled every ``sample_step`` meters (optionally restricted
    to ``span``); runs of hidden samples are widened by one step on both
    sides so the result always contains the exact shadow.
    """
    if sample_step <= 0:
        raise GeometryError("sample_step must be positive")
    occluders = list(occluders)
    if not occluders:
        return []
    lo, hi = (0.0, lane.length) if span is None else (max(0.0, span[0]), min(lane.length, span[1]))
    if hi <= lo:
        return []
    j0 = int(math.ceil(lo / sample_step))
    j1 = int(math.floor(hi / sample_step))
    u = np.arange(j0, j1 + 1) * sample_step
    if len(u) == 0:
        return []
    pts, _ = poses_at(lane, u)
    origin = np.broadcast_to(np.asarray(ego_pos, dtype=float), pts.shape)
    hidden = np.zeros(len(u), dtype=bool)
    for poly in occluders:
        hidden |= segments_hit_polygon(origin, pts, poly)
    return [
        (max(lo, float(u[i]) - sample_step), min(hi, float(u[j]) + sample_step))
        for i, j in _runs(hidden)
    ]
