"""Manhattan World optimization over the confirmed global map.

Indoor walls overwhelmingly follow two perpendicular axes. This module
estimates that dominant frame from the confirmed wall tracks, snaps
near-axis walls to exact orthogonality, and reconnects trimmed corners
into closed loops, producing a watertight floorplan overlay. The raw
Kalman tracks are never mutated; the floorplan is a derived product that
can be regenerated from any map snapshot.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from bevmap.errors import NoDominantFrameError
from bevmap.fuse_global import ColumnTrack
from bevmap.geom import (
    Point2,
    PolarSegment,
    axial_angle_diff,
    polar_to_segment,
    wrap_pi,
    wrap_two_pi,
)

log = logging.getLogger("bevmap.manhattan")

DEFAULT_SNAP_TOL = math.radians(7.0)
DEFAULT_MERGE_RADIUS = 0.3

# Below this resultant-length ratio the 4-theta distribution is too spread
# to define a single Manhattan frame (mixed-orientation building wings).
_MIN_CONCENTRATION = 0.5


@dataclass(frozen=True)
class DominantFrame:
    """Primary axis direction of the environment, identified mod 90 deg."""

    axis_angle: float
    support: float

    def __post_init__(self):
        if not 0.0 <= self.axis_angle < math.pi / 2.0:
            raise ValueError(
                f"axis_angle must be in [0, pi/2), got {self.axis_angle}")


@dataclass
class Floorplan:
    """Snapped walls plus the corner/loop topology extracted from them.

    corners holds each junction exactly once; loops are cycles of corner
    indices, so two loop edges meeting at a corner share its coordinates
    by construction. Columns pass through from the global map untouched.
    """

    walls: list[PolarSegment]
    corners: list[Point2]
    loops: list[list[int]]
    columns: list[ColumnTrack]

    def to_dict(self) -> dict:
        return {
            "walls": [{"rho": w.rho, "alpha": w.alpha, "d1": w.d1, "d2": w.d2}
                      for w in self.walls],
            "corners": [{"x": c.x, "y": c.y} for c in self.corners],
            "loops": [list(loop) for loop in self.loops],
            "columns": [{"id": c.id, "x": c.center.x, "y": c.center.y,
                         "r": c.radius, "observations": c.observations}
                        for c in self.columns],
        }


def _state_of(w) -> PolarSegment:
    return w.state if hasattr(w, "state") else w


def estimate_dominant(walls) -> DominantFrame:
    """Length-weighted dominant axis over directions identified mod 90 deg.

    Uses the 4-theta trick: doubling twice maps both parallel and
    perpendicular walls onto the same unit vector, so one circular mean
    recovers the shared frame. Accepts WallTrack or PolarSegment inputs.
    """
    states = [_state_of(w) for w in walls]
    if not states:
        raise NoDominantFrameError("no confirmed walls to estimate a frame from")
    s = c = support = 0.0
    for w in states:
        length = w.length
        # sin/cos of 4*direction equals sin/cos of 4*normal angle.
        s += length * math.sin(4.0 * w.alpha)
        c += length * math.cos(4.0 * w.alpha)
        support += length
    if support <= 0.0:
        raise NoDominantFrameError("confirmed walls have zero total length")
    concentration = math.hypot(s, c) / support
    if concentration < _MIN_CONCENTRATION:
        log.warning(
            "wall orientations are strongly mixed (concentration %.2f); "
            "a single Manhattan frame fits this map poorly", concentration)
    axis = (math.atan2(s, c) / 4.0) % (math.pi / 2.0)
    if axis >= math.pi / 2.0:
        # folding a tiny negative angle can round up to exactly pi/2
        axis = 0.0
    return DominantFrame(axis_angle=axis, support=support)


def _snap_candidates(frame: DominantFrame) -> list[float]:
    """The four exact normal angles a snapped wall may carry."""
    return [wrap_two_pi(frame.axis_angle + k * (math.pi / 2.0))
            for k in range(4)]


def snap_orthogonal(walls: list[PolarSegment], frame: DominantFrame,
                    tol: float = DEFAULT_SNAP_TOL) -> list[PolarSegment]:
    """Replace near-axis wall directions with the exact frame axes.

    The snap pivots each wall about its midpoint: alpha becomes the
    nearest of the four canonical axis normals, rho is recomputed so the
    line still passes through the original midpoint, and the extent is
    the projection of the original endpoints. Walls farther than tol
    from both axes pass through untouched, as do walls already carrying
    a canonical angle, which makes the operation idempotent bit for bit.
    """
    candidates = _snap_candidates(frame)
    out = []
    for w in walls:
        if w.alpha in candidates:
            out.append(w)
            continue
        diffs = [abs(wrap_pi(cand - w.alpha)) for cand in candidates]
        best = min(range(4), key=lambda k: diffs[k])
        if diffs[best] > tol:
            out.append(w)
            continue
        alpha = candidates[best]
        seg = polar_to_segment(w)
        mid = seg.midpoint
        nx, ny = math.cos(alpha), math.sin(alpha)
        rho = mid.x * nx + mid.y * ny
        if rho < 0.0:
            rho = -rho
            alpha = candidates[(best + 2) % 4]
            nx, ny = math.cos(alpha), math.sin(alpha)
        tx, ty = -ny, nx
        da = seg.p1.x * tx + seg.p1.y * ty
        db = seg.p2.x * tx + seg.p2.y * ty
        if da > db:
            da, db = db, da
        out.append(PolarSegment(rho=rho, alpha=alpha, d1=da, d2=db))
    return out


def _intersect(a: PolarSegment, b: PolarSegment) -> Point2 | None:
    """Exact intersection of the two infinite lines, None when parallel."""
    nax, nay = a.normal()
    nbx, nby = b.normal()
    det = nax * nby - nay * nbx
    if abs(det) < 1e-12:
        return None
    x = (a.rho * nby - b.rho * nay) / det
    y = (nax * b.rho - nbx * a.rho) / det
    return Point2(x, y)


def _canonical_cycle(cycle: list[int]) -> list[int]:
    i = cycle.index(min(cycle))
    rot = cycle[i:] + cycle[:i]
    rev = [rot[0]] + rot[1:][::-1]
    return rot if rot[1] <= rev[1] else rev


def close_corners(walls: list[PolarSegment],
                  merge_radius: float = DEFAULT_MERGE_RADIUS,
                  columns: list[ColumnTrack] | None = None) -> Floorplan:
    """Reconnect snapped walls into corners and closed loops.

    Perpendicular wall pairs whose endpoints approach within merge_radius
    get their shared corner recomputed as the exact line intersection;
    both nearest endpoints are trimmed or extended onto it. Endpoint
    pairing is greedy by gap size and consumes each endpoint once.
    Corners then induce a wall incidence graph whose cycles become loops;
    walls keeping an open end stay as dangling edges.
    """
    n = len(walls)
    ends = []
    for w in walls:
        s = polar_to_segment(w)
        ends.append((s.p1, s.p2))

    candidates = []
    for i in range(n):
        for j in range(i + 1, n):
            if axial_angle_diff(walls[i].alpha, walls[j].alpha) <= math.pi / 4.0:
                continue  # parallel-ish pair: no well-defined corner
            for ei in (0, 1):
                for ej in (0, 1):
                    pa, pb = ends[i][ei], ends[j][ej]
                    d = math.hypot(pa.x - pb.x, pa.y - pb.y)
                    if d <= merge_radius:
                        candidates.append((d, i, ei, j, ej))
    candidates.sort()

    bound: dict[tuple[int, int], int] = {}
    corners: list[Point2] = []
    incident: list[list[tuple[int, int]]] = []
    for _d, i, ei, j, ej in candidates:
        if (i, ei) in bound or (j, ej) in bound:
            continue
        x = _intersect(walls[i], walls[j])
        if x is None:
            continue
        idx = None
        for k, c in enumerate(corners):
            if math.hypot(c.x - x.x, c.y - x.y) <= 1e-9:
                idx = k
                break
        if idx is None:
            corners.append(x)
            incident.append([])
            idx = len(corners) - 1
        bound[(i, ei)] = idx
        bound[(j, ej)] = idx
        incident[idx].append((i, ei))
        incident[idx].append((j, ej))

    trimmed = []
    for i, w in enumerate(walls):
        d1, d2 = w.d1, w.d2
        tx, ty = w.tangent()
        if (i, 0) in bound:
            c = corners[bound[(i, 0)]]
            d1 = c.x * tx + c.y * ty
        if (i, 1) in bound:
            c = corners[bound[(i, 1)]]
            d2 = c.x * tx + c.y * ty
        if d1 > d2:
            d1, d2 = d2, d1
        trimmed.append(PolarSegment(w.rho, w.alpha, d1, d2))

    loops = []
    in_loop: set[int] = set()
    for start in range(n):
        if start in in_loop:
            continue
        if (start, 0) not in bound or (start, 1) not in bound:
            continue
        first_corner = bound[(start, 0)]
        cycle = [first_corner]
        cycle_walls = [start]
        cur = start
        corner = bound[(start, 1)]
        closed = False
        for _ in range(n + 1):
            if corner == first_corner:
                closed = True
                break
            cycle.append(corner)
            nxt = None
            for wi, we in incident[corner]:
                if wi != cur:
                    nxt, enter_end = wi, we
                    break
            if nxt is None or (nxt, 1 - enter_end) not in bound:
                break
            cycle_walls.append(nxt)
            cur = nxt
            corner = bound[(nxt, 1 - enter_end)]
        if closed and len(cycle) >= 4:
            loops.append(_canonical_cycle(cycle))
            in_loop.update(cycle_walls)
    loops.sort()

    return Floorplan(walls=trimmed, corners=corners, loops=loops,
                     columns=list(columns) if columns else [])


def optimize(tracks, columns: list[ColumnTrack] | None = None,
             tol: float = DEFAULT_SNAP_TOL,
             merge_radius: float = DEFAULT_MERGE_RADIUS) -> Floorplan:
    """Full optimizer chain over confirmed tracks: frame, snap, closure."""
    frame = estimate_dominant(tracks)
    snapped = snap_orthogonal([_state_of(t) for t in tracks], frame, tol)
    return close_corners(snapped, merge_radius, columns)
