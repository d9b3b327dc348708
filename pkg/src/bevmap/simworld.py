"""Synthetic floorplan worlds and a 2D ray-cast LiDAR simulator.

Worlds are vertical extrusions: walls are thick bands around centerline
segments, columns are discs, clutter is oriented rectangles, all with a
height. Beams are cast in 2D and gated by the beam's z at the hit
distance (z = r*sin(elevation) + sensor height), which is exact for this
world class. Glass walls drop returns with their own probability and can
optionally produce specular mirror ghosts: the beam reflects off the
glass plane and reports the total path length to whatever it hits next,
so phantom geometry appears behind the glass.

Everything is seeded and bit-reproducible: frame i of a trajectory uses
an RNG derived from (sensor.seed, i) only.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bevmap import kernels
from bevmap.bev import LidarFrame
from bevmap.errors import ConfigError, FormatError, SimulationError
from bevmap.geom import Point2, Pose2, Segment2

DEG = math.pi / 180.0


@dataclass(frozen=True)
class Wall:
    """Thick wall band: centerline segment, thickness and height in meters."""

    centerline: Segment2
    thickness: float = 0.1
    height: float = 3.0

    def __post_init__(self):
        if self.thickness <= 0:
            raise ConfigError(f"wall thickness must be > 0, got {self.thickness}")
        if self.height <= 0:
            raise ConfigError(f"wall height must be > 0, got {self.height}")


@dataclass(frozen=True)
class Column:
    center: Point2
    radius: float
    height: float = 3.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError(f"column radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Clutter:
    """Oriented rectangle: center, half extents along its axes, axis angle."""

    center: Point2
    half_u: float
    half_v: float
    angle: float = 0.0
    height: float = 1.5

    @property
    def area(self) -> float:
        return 4.0 * self.half_u * self.half_v


@dataclass
class FloorplanWorld:
    walls: list[Wall] = field(default_factory=list)
    columns: list[Column] = field(default_factory=list)
    clutter: list[Clutter] = field(default_factory=list)
    glass: dict[int, float] = field(default_factory=dict)
    floor: bool = False
    ceiling_height: float = 0.0
    glass_ghost: bool = False

    def __post_init__(self):
        for idx, p in self.glass.items():
            if not 0 <= idx < len(self.walls):
                raise ConfigError(f"glass wall index {idx} out of range")
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"glass dropout must be in [0,1], got {p}")


@dataclass(frozen=True)
class SensorModel:
    """Spinning multi-channel LiDAR parameters.

    height is the sensor's mounting height above the floor; the beam's
    absolute z at horizontal distance s is height + s*tan(elevation).
    """

    channels: int = 32
    elevations: tuple = ()
    azimuth_steps: int = 1024
    max_range: float = 45.0
    sigma_r: float = 0.02
    dropout_p: float = 0.0
    seed: int = 0
    height: float = 0.8

    def __post_init__(self):
        if self.sigma_r < 0:
            raise ConfigError(f"sigma_r must be >= 0, got {self.sigma_r}")
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ConfigError(f"dropout_p must be in [0,1], got {self.dropout_p}")
        el = self.elevations
        if not el:
            el = tuple(np.linspace(-22.5 * DEG, 22.5 * DEG, self.channels))
        else:
            el = tuple(float(e) for e in el)
        if len(el) != self.channels:
            raise ConfigError(
                f"{len(el)} elevations for {self.channels} channels")
        object.__setattr__(self, "elevations", el)

    def azimuth_grid(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * math.pi, self.azimuth_steps, endpoint=False)


@dataclass(frozen=True)
class GroundTruth:
    wall_centerlines: list[Segment2]
    column_discs: list[tuple[Point2, float]]


def ground_truth_of(world: FloorplanWorld) -> GroundTruth:
    return GroundTruth(
        wall_centerlines=[w.centerline for w in world.walls],
        column_discs=[(c.center, c.radius) for c in world.columns],
    )


# --- scene geometry as struct-of-arrays for the raycast kernel ---

def _scene_arrays(world: FloorplanWorld):
    """Boxes (walls with square end caps, then clutter) and discs (columns)."""
    n_w = len(world.walls)
    n_c = len(world.clutter)
    b = np.zeros((n_w + n_c, 7), dtype=np.float64)
    for i, w in enumerate(world.walls):
        seg = w.centerline
        ang = seg.direction()
        mid = seg.midpoint
        b[i] = (mid.x, mid.y, math.cos(ang), math.sin(ang),
                seg.length / 2.0 + w.thickness / 2.0, w.thickness / 2.0, w.height)
    for j, cl in enumerate(world.clutter):
        b[n_w + j] = (cl.center.x, cl.center.y, math.cos(cl.angle), math.sin(cl.angle),
                      cl.half_u, cl.half_v, cl.height)
    d = np.zeros((len(world.columns), 4), dtype=np.float64)
    for k, col in enumerate(world.columns):
        d[k] = (col.center.x, col.center.y, col.radius, col.height)
    return b, d


def point_in_solid(world: FloorplanWorld, x: float, y: float) -> bool:
    """True when (x, y) lies inside any wall band, column or clutter piece."""
    boxes, discs = _scene_arrays(world)
    for cx, cy, ax, ay, hu, hv, _h in boxes:
        rx, ry = x - cx, y - cy
        if abs(rx * ax + ry * ay) <= hu and abs(-rx * ay + ry * ax) <= hv:
            return True
    for cx, cy, r, _h in discs:
        if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
            return True
    return False


def _frame_rng(sensor: SensorModel, frame_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([sensor.seed, frame_index]))


def simulate_frame(world: FloorplanWorld, sensor: SensorModel, pose: Pose2,
                   frame_index: int = 0) -> LidarFrame:
    """Cast one full rotation and return the noisy frame.

    Rays originate at the pose; azimuth 0 points along the pose heading.
    Misses and dropped returns encode as range 0. Hits beyond max_range
    (after noise) also become 0.
    """
    if point_in_solid(world, pose.x, pose.y):
        raise SimulationError(f"pose ({pose.x:.3f}, {pose.y:.3f}) is inside solid geometry")

    boxes, discs = _scene_arrays(world)
    az = sensor.azimuth_grid()
    el = np.asarray(sensor.elevations)
    n_ch, n_az = el.shape[0], az.shape[0]
    m = n_ch * n_az

    # Channel-major flattening, matching LidarFrame.ranges.reshape.
    world_az = (pose.theta + az)[None, :] * np.ones((n_ch, 1))
    dir_x = np.cos(world_az).ravel()
    dir_y = np.sin(world_az).ravel()
    tan_el = np.repeat(np.tan(el), n_az)
    cos_el = np.repeat(np.cos(el), n_az)
    ox = np.full(m, pose.x)
    oy = np.full(m, pose.y)
    z0 = np.full(m, sensor.height)
    s_max = sensor.max_range * cos_el

    s, ids = kernels.raycast(
        ox, oy, dir_x, dir_y, s_max, z0, tan_el,
        np.ascontiguousarray(boxes[:, 0]), np.ascontiguousarray(boxes[:, 1]),
        np.ascontiguousarray(boxes[:, 2]), np.ascontiguousarray(boxes[:, 3]),
        np.ascontiguousarray(boxes[:, 4]), np.ascontiguousarray(boxes[:, 5]),
        np.ascontiguousarray(boxes[:, 6]),
        np.ascontiguousarray(discs[:, 0]), np.ascontiguousarray(discs[:, 1]),
        np.ascontiguousarray(discs[:, 2]), np.ascontiguousarray(discs[:, 3]),
        world.floor, world.ceiling_height,
    )

    rng = _frame_rng(sensor, frame_index)
    u = rng.random(m)
    noise = rng.normal(0.0, 1.0, m)

    hit = ids != -3
    drop_p = np.where(hit, sensor.dropout_p, 0.0)
    glass_hit = np.zeros(m, dtype=bool)
    for widx, p in world.glass.items():
        sel = ids == widx
        drop_p = np.where(sel, p, drop_p)
        glass_hit |= sel
    dropped = hit & (u < drop_p)

    ranges = np.where(hit & ~dropped, s / cos_el, 0.0)

    if world.glass_ghost:
        ghost_idx = np.nonzero(dropped & glass_hit)[0]
        if ghost_idx.size:
            g_s1 = s[ghost_idx]
            g_ids = ids[ghost_idx]
            # Reflect direction across the glass wall plane.
            nx = -boxes[g_ids, 3]
            ny = boxes[g_ids, 2]
            dxg = dir_x[ghost_idx]
            dyg = dir_y[ghost_idx]
            dot = dxg * nx + dyg * ny
            rdx = dxg - 2.0 * dot * nx
            rdy = dyg - 2.0 * dot * ny
            px = ox[ghost_idx] + g_s1 * dxg + 1e-9 * rdx
            py = oy[ghost_idx] + g_s1 * dyg + 1e-9 * rdy
            gz0 = z0[ghost_idx] + g_s1 * tan_el[ghost_idx]
            g_smax = s_max[ghost_idx] - g_s1
            s2, ids2 = kernels.raycast(
                px, py, rdx, rdy, g_smax, gz0, tan_el[ghost_idx],
                np.ascontiguousarray(boxes[:, 0]), np.ascontiguousarray(boxes[:, 1]),
                np.ascontiguousarray(boxes[:, 2]), np.ascontiguousarray(boxes[:, 3]),
                np.ascontiguousarray(boxes[:, 4]), np.ascontiguousarray(boxes[:, 5]),
                np.ascontiguousarray(boxes[:, 6]),
                np.ascontiguousarray(discs[:, 0]), np.ascontiguousarray(discs[:, 1]),
                np.ascontiguousarray(discs[:, 2]), np.ascontiguousarray(discs[:, 3]),
                world.floor, world.ceiling_height,
            )
            ghost_hit = ids2 != -3
            total = (g_s1 + np.where(ghost_hit, s2, 0.0)) / cos_el[ghost_idx]
            ranges[ghost_idx] = np.where(ghost_hit, total, 0.0)

    signal = ranges > 0
    ranges = np.where(signal, ranges + noise * sensor.sigma_r, 0.0)
    ranges = np.where((ranges <= 0) | (ranges > sensor.max_range), 0.0, ranges)
    return LidarFrame(ranges.reshape(n_ch, n_az), az, el, 0.0)


# --- procedural scenarios ---

def _rect_walls(half_x: float, half_y: float, thickness: float, height: float) -> list[Wall]:
    c = [Point2(-half_x, -half_y), Point2(half_x, -half_y),
         Point2(half_x, half_y), Point2(-half_x, half_y)]
    return [Wall(Segment2(c[i], c[(i + 1) % 4]), thickness, height) for i in range(4)]


def _make_garage(rng) -> FloorplanWorld:
    walls = _rect_walls(14.0, 9.0, 0.08, 3.0)
    columns = []
    for gx in (-10.5, -3.5, 3.5, 10.5):
        for gy in (-4.5, 4.5):
            jx = gx + rng.uniform(-0.15, 0.15)
            jy = gy + rng.uniform(-0.15, 0.15)
            columns.append(Column(Point2(jx, jy), 0.22, 3.0))
    clutter = [
        Clutter(Point2(-12.5, 7.6), 0.9, 0.5, rng.uniform(-0.2, 0.2), 1.5),
        Clutter(Point2(12.3, -7.4), 0.7, 0.5, rng.uniform(-0.2, 0.2), 1.5),
    ]
    return FloorplanWorld(walls, columns, clutter, {}, floor=True, ceiling_height=3.0)


def _make_corridor(rng) -> FloorplanWorld:
    walls = _rect_walls(15.0, 1.6, 0.1, 2.8)
    # One long side is glass with heavy dropout; index 2 is the y=+1.6 wall.
    world = FloorplanWorld(walls, [], [], {2: 0.7}, floor=True, ceiling_height=2.8)
    return world


def _make_lab(rng) -> FloorplanWorld:
    walls = _rect_walls(5.0, 4.0, 0.1, 3.0)
    clutter = []
    # Dense benches and cabinets; keep a clear disc around the origin so
    # trajectories stay in free space.
    target = 0.22 * (10.0 * 8.0)
    area = 0.0
    attempts = 0
    while area < target and attempts < 500:
        attempts += 1
        hu = rng.uniform(0.6, 0.95)
        hv = rng.uniform(0.35, 0.55)
        cx = rng.uniform(-4.0, 4.0)
        cy = rng.uniform(-3.0, 3.0)
        if math.hypot(cx, cy) < 2.2 + max(hu, hv):
            continue
        c = Clutter(Point2(cx, cy), hu, hv, rng.uniform(0, math.pi), rng.uniform(1.3, 2.1))
        clutter.append(c)
        area += c.area
    # Carts, shelving units and instrument racks: sub-meter faces
    # everywhere, tall enough to intersect most scan channels.
    placed = 0
    attempts = 0
    while placed < 40 and attempts < 600:
        attempts += 1
        hu = rng.uniform(0.24, 0.3)
        hv = rng.uniform(0.12, 0.2)
        cx = rng.uniform(-4.2, 4.2)
        cy = rng.uniform(-3.2, 3.2)
        if math.hypot(cx, cy) < 2.2 + max(hu, hv):
            continue
        clutter.append(Clutter(Point2(cx, cy), hu, hv,
                               rng.uniform(0, math.pi), rng.uniform(1.2, 2.0)))
        placed += 1
    world = FloorplanWorld(walls, [], clutter, {1: 0.9}, floor=True, ceiling_height=3.0)
    return world


def _make_hallway(rng) -> FloorplanWorld:
    # Outer shell with two dividers leaving door gaps; thin walls.
    t, h = 0.05, 2.6
    walls = _rect_walls(6.0, 4.0, t, h)
    walls += [
        Wall(Segment2(Point2(-2.0, -4.0), Point2(-2.0, -0.6)), t, h),
        Wall(Segment2(Point2(-2.0, 0.6), Point2(-2.0, 4.0)), t, h),
        Wall(Segment2(Point2(2.0, -4.0), Point2(2.0, -0.6)), t, h),
        Wall(Segment2(Point2(2.0, 0.6), Point2(2.0, 4.0)), t, h),
    ]
    clutter = [Clutter(Point2(4.4, 3.2), 0.5, 0.3, rng.uniform(-0.3, 0.3), 1.4)]
    return FloorplanWorld(walls, [], clutter, {}, floor=True, ceiling_height=2.6)


_SCENARIOS = {
    "garage": _make_garage,
    "corridor": _make_corridor,
    "lab": _make_lab,
    "hallway": _make_hallway,
}

SCENARIO_KINDS = tuple(sorted(_SCENARIOS))


def make_scenario(kind: str, seed: int = 0) -> tuple[FloorplanWorld, GroundTruth]:
    """Procedurally generate one of the benchmark scenes."""
    if kind not in _SCENARIOS:
        raise ConfigError(f"unknown scenario {kind!r}, expected one of {SCENARIO_KINDS}")
    rng = np.random.default_rng(np.random.SeedSequence([zlib.crc32(kind.encode()), seed]))
    world = _SCENARIOS[kind](rng)
    return world, ground_truth_of(world)


def make_trajectory(kind: str, n_poses: int, seed: int = 0,
                    world: FloorplanWorld | None = None) -> list[tuple[Pose2, float]]:
    """Sweep poses through a scenario's free corridor, 10 Hz timestamps."""
    if world is None:
        world, _ = make_scenario(kind, seed)
    rng = np.random.default_rng(np.random.SeedSequence([zlib.crc32(kind.encode()), seed, 1]))
    out = []
    for i in range(n_poses):
        f = i / max(n_poses - 1, 1)
        if kind == "garage":
            x, y = -6.0 + 12.0 * f, 0.0
        elif kind == "corridor":
            x, y = -12.0 + 24.0 * f, 0.0
        elif kind == "lab":
            ang = 2.0 * math.pi * f
            x, y = 1.2 * math.cos(ang), 1.2 * math.sin(ang)
        else:
            x, y = -4.5 + 9.0 * f, 0.0
        theta = rng.uniform(-0.15, 0.15)
        pose = Pose2(x, y, theta)
        if point_in_solid(world, x, y):
            raise SimulationError(f"trajectory pose {i} for {kind} is inside geometry")
        out.append((pose, 0.1 * i))
    return out


# --- world / trajectory files ---

def save_world(path, world: FloorplanWorld) -> None:
    doc = {
        "walls": [
            {"p1": [w.centerline.p1.x, w.centerline.p1.y],
             "p2": [w.centerline.p2.x, w.centerline.p2.y],
             "thickness": w.thickness, "height": w.height}
            for w in world.walls
        ],
        "columns": [
            {"center": [c.center.x, c.center.y], "radius": c.radius, "height": c.height}
            for c in world.columns
        ],
        "clutter": [
            {"center": [c.center.x, c.center.y], "half_u": c.half_u,
             "half_v": c.half_v, "angle": c.angle, "height": c.height}
            for c in world.clutter
        ],
        "glass": {str(i): p for i, p in world.glass.items()},
        "floor": world.floor,
        "ceiling_height": world.ceiling_height,
        "glass_ghost": world.glass_ghost,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_world(path) -> FloorplanWorld:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
        walls = [Wall(Segment2(Point2(*w["p1"]), Point2(*w["p2"])),
                      w["thickness"], w["height"]) for w in doc["walls"]]
        columns = [Column(Point2(*c["center"]), c["radius"], c["height"])
                   for c in doc["columns"]]
        clutter = [Clutter(Point2(*c["center"]), c["half_u"], c["half_v"],
                           c["angle"], c["height"]) for c in doc["clutter"]]
        glass = {int(k): float(v) for k, v in doc.get("glass", {}).items()}
        return FloorplanWorld(walls, columns, clutter, glass,
                              floor=bool(doc.get("floor", False)),
                              ceiling_height=float(doc.get("ceiling_height", 0.0)),
                              glass_ghost=bool(doc.get("glass_ghost", False)))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"invalid world file {path}: {e}") from e


def save_trajectory(path, poses: list[tuple[Pose2, float]]) -> None:
    doc = [{"x": p.x, "y": p.y, "theta": p.theta, "timestamp": ts}
           for p, ts in poses]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_trajectory(path) -> list[tuple[Pose2, float]]:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return [(Pose2(d["x"], d["y"], d["theta"]), float(d["timestamp"])) for d in doc]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"invalid trajectory file {path}: {e}") from e


def save_ground_truth(path, gt: GroundTruth) -> None:
    doc = {
        "wall_centerlines": [[s.p1.x, s.p1.y, s.p2.x, s.p2.y]
                             for s in gt.wall_centerlines],
        "column_discs": [[c.x, c.y, r] for c, r in gt.column_discs],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_ground_truth(path) -> GroundTruth:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
        walls = [Segment2(Point2(a, b), Point2(c, d))
                 for a, b, c, d in doc["wall_centerlines"]]
        discs = [(Point2(x, y), float(r)) for x, y, r in doc["column_discs"]]
        return GroundTruth(wall_centerlines=walls, column_discs=discs)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise FormatError(f"invalid ground-truth file {path}: {e}") from e


# --- training-label export ---

def _clip_to_square(x1, y1, x2, y2, half):
    """Liang-Barsky clip of a segment to [-half, half]^2; None if outside."""
    dx, dy = x2 - x1, y2 - y1
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x1 + half), (dx, half - x1),
                 (-dy, y1 + half), (dy, half - y1)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            if r > t0:
                t0 = r
        else:
            if r < t0:
                return None
            if r < t1:
                t1 = r
    return (x1 + t0 * dx, y1 + t0 * dy, x1 + t1 * dx, y1 + t1 * dy)


def _sensor_frame_boxes(world: FloorplanWorld, pose: Pose2):
    """Scene boxes (walls with caps, clutter) transformed into sensor frame."""
    inv = pose.inverse()
    out = []
    for w in world.walls:
        seg = w.centerline
        mid = inv.apply(seg.midpoint)
        ang = math.atan2(seg.p2.y - seg.p1.y, seg.p2.x - seg.p1.x) - pose.theta
        out.append((mid.x, mid.y, ang,
                    seg.length / 2.0 + w.thickness / 2.0, w.thickness / 2.0))
    for c in world.clutter:
        ctr = inv.apply(c.center)
        out.append((ctr.x, ctr.y, c.angle - pose.theta, c.half_u, c.half_v))
    return out


def render_world_bev(world: FloorplanWorld, georef, pose: Pose2 = Pose2(0.0, 0.0, 0.0)):
    """Rasterize the world's solid footprint into a sensor-frame BEV image.

    A pixel is occupied when its center lies inside a wall band, clutter
    rectangle or column disc. This is the clean synthetic image that label
    generation annotates; see inject_noise_patches for degraded variants.
    """
    from bevmap.bev import BevImage

    size = georef.size
    scale = georef.scale
    occ = np.zeros((size, size), dtype=np.uint8)

    def _fill_box(cx, cy, ang, hu, hv):
        ca, sa = math.cos(ang), math.sin(ang)
        corners_x = [cx + su * hu * ca + sv * hv * -sa for su, sv in
                     ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        corners_y = [cy + su * hu * sa + sv * hv * ca for su, sv in
                     ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        c_lo = max(0, int(math.floor(min(corners_x) / scale)) + size // 2)
        c_hi = min(size - 1, int(math.floor(max(corners_x) / scale)) + size // 2)
        r_lo = max(0, size // 2 - 1 - int(math.floor(max(corners_y) / scale)))
        r_hi = min(size - 1, size // 2 - 1 - int(math.floor(min(corners_y) / scale)))
        if c_lo > c_hi or r_lo > r_hi:
            return
        cols = np.arange(c_lo, c_hi + 1)
        rows = np.arange(r_lo, r_hi + 1)
        px = (cols - size // 2 + 0.5) * scale
        py = (size // 2 - 1 - rows + 0.5) * scale
        rx = px[None, :] - cx
        ry = py[:, None] - cy
        inside = (np.abs(rx * ca + ry * sa) <= hu) & (np.abs(-rx * sa + ry * ca) <= hv)
        occ[r_lo:r_hi + 1, c_lo:c_hi + 1] |= inside.astype(np.uint8)

    for cx, cy, ang, hu, hv in _sensor_frame_boxes(world, pose):
        _fill_box(cx, cy, ang, hu, hv)
    inv = pose.inverse()
    for col in world.columns:
        ctr = inv.apply(col.center)
        _fill_disc_center(occ, ctr.x, ctr.y, col.radius, scale, size)
    return BevImage(size, size, scale, occ)


def _fill_disc_center(occ, cx, cy, radius, scale, size):
    c_lo = max(0, int(math.floor((cx - radius) / scale)) + size // 2)
    c_hi = min(size - 1, int(math.floor((cx + radius) / scale)) + size // 2)
    r_lo = max(0, size // 2 - 1 - int(math.floor((cy + radius) / scale)))
    r_hi = min(size - 1, size // 2 - 1 - int(math.floor((cy - radius) / scale)))
    if c_lo > c_hi or r_lo > r_hi:
        return
    cols = np.arange(c_lo, c_hi + 1)
    rows = np.arange(r_lo, r_hi + 1)
    px = (cols - size // 2 + 0.5) * scale
    py = (size // 2 - 1 - rows + 0.5) * scale
    rx = px[None, :] - cx
    ry = py[:, None] - cy
    inside = rx * rx + ry * ry <= radius * radius
    occ[r_lo:r_hi + 1, c_lo:c_hi + 1] |= inside.astype(np.uint8)


def export_obb_labels(world: FloorplanWorld, georef, pose: Pose2 = Pose2(0.0, 0.0, 0.0),
                      noise_sigma: float = 0.02):
    """Generate OBB training labels plus the matching synthetic image.

    Wall boxes cover the visible (in-raster) part of each centerline; the
    box half-height widens by two range-noise sigmas past the physical
    half-thickness so labels cover the speckle band detectors actually
    see. Columns label as squares of their radius. Returns (records,
    BevImage).
    """
    from bevmap.detect.obb import COLUMN_CLASS, WALL_CLASS, ObbRecord

    inv = pose.inverse()
    half = georef.half_extent
    records = []
    for w in world.walls:
        a = inv.apply(w.centerline.p1)
        b = inv.apply(w.centerline.p2)
        clipped = _clip_to_square(a.x, a.y, b.x, b.y, half)
        if clipped is None:
            continue
        x1, y1, x2, y2 = clipped
        length = math.hypot(x2 - x1, y2 - y1)
        if length < georef.scale:
            continue
        mx, my = (x1 + x2) / 2.0, (y1 + y2) / 2.0
        cu, cv = georef.world_to_px(mx, my)
        ang_world = math.atan2(y2 - y1, x2 - x1)
        records.append(ObbRecord(
            WALL_CLASS, float(cu), float(cv),
            length / 2.0 / georef.scale,
            (w.thickness / 2.0 + 2.0 * noise_sigma) / georef.scale,
            -ang_world, 1.0))
    for c in world.columns:
        ctr = inv.apply(c.center)
        if abs(ctr.x) > half or abs(ctr.y) > half:
            continue
        cu, cv = georef.world_to_px(ctr.x, ctr.y)
        records.append(ObbRecord(
            COLUMN_CLASS, float(cu), float(cv),
            c.radius / georef.scale, c.radius / georef.scale, 0.0, 1.0))
    return records, render_world_bev(world, georef, pose)


def inject_noise_patches(image, seed: int, n_patches: int = 30,
                         on_walls: bool = False):
    """Speckle a copy of a BEV image with small occupied blobs.

    Patches land uniformly over the raster, or centered on existing
    occupied pixels when on_walls is set. Labels are unaffected: they
    derive from world geometry, not pixels.
    """
    from bevmap.bev import BevImage

    rng = np.random.default_rng(seed)
    occ = image.occupied.copy()
    size = image.width
    wall_r, wall_c = np.nonzero(image.occupied)
    for _ in range(n_patches):
        if on_walls and wall_r.size:
            k = int(rng.integers(wall_r.size))
            cy, cx = float(wall_r[k]), float(wall_c[k])
        else:
            cy = float(rng.uniform(0, size))
            cx = float(rng.uniform(0, size))
        n_px = int(rng.poisson(25)) + 5
        offs = rng.normal(0.0, 2.5, (n_px, 2))
        rr = np.clip(np.round(cy + offs[:, 0]), 0, size - 1).astype(np.int64)
        cc = np.clip(np.round(cx + offs[:, 1]), 0, size - 1).astype(np.int64)
        occ[rr, cc] = 1
    return BevImage(size, size, image.scale, occ)
