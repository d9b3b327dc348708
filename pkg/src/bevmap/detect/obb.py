"""Oriented-bounding-box label ingestion.

Stands in for an external OBB detector: reads its output file and converts
boxes into the common feature space. Class 0 boxes are wall bands whose
major axis becomes the wall segment; class 1 boxes are columns. Two file
layouts are accepted: JSON Lines with a georef header, and the YOLO-OBB
normalized 4-corner text format.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

from bevmap.bev import Georef
from bevmap.errors import FormatError
from bevmap.geom import Point2, Segment2

from .base import RawDetection

log = logging.getLogger("bevmap.detect.obb")

DEFAULT_CONFIDENCE_FLOOR = 0.25

WALL_CLASS = 0
COLUMN_CLASS = 1
_KNOWN_CLASSES = (WALL_CLASS, COLUMN_CLASS)


@dataclass(frozen=True)
class ObbRecord:
    """One oriented box in pixel coordinates.

    Canonicalized so half_w >= half_h; when the raw box is taller than
    wide the axes swap and the angle turns by pi/2. Angles are axial,
    wrapped to [-pi/2, pi/2).
    """

    class_id: int
    cx: float
    cy: float
    half_w: float
    half_h: float
    angle: float
    confidence: float = 1.0

    def __post_init__(self):
        if self.half_w <= 0 or self.half_h <= 0:
            raise ValueError(f"half extents must be > 0, got ({self.half_w}, {self.half_h})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")
        if not math.isfinite(self.angle):
            raise ValueError("angle must be finite")
        hw, hh, ang = self.half_w, self.half_h, self.angle
        if hh > hw:
            hw, hh = hh, hw
            ang += math.pi / 2.0
        ang = math.fmod(ang, math.pi)
        if ang < -math.pi / 2.0:
            ang += math.pi
        elif ang >= math.pi / 2.0:
            ang -= math.pi
        object.__setattr__(self, "half_w", hw)
        object.__setattr__(self, "half_h", hh)
        object.__setattr__(self, "angle", ang)

    def corners_px(self) -> list[tuple[float, float]]:
        """Corner pixel coordinates, counterclockwise in image axes."""
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        ux, uy = ca * self.half_w, sa * self.half_w
        vx, vy = -sa * self.half_h, ca * self.half_h
        return [
            (self.cx - ux - vx, self.cy - uy - vy),
            (self.cx + ux - vx, self.cy + uy - vy),
            (self.cx + ux + vx, self.cy + uy + vy),
            (self.cx - ux + vx, self.cy - uy + vy),
        ]


def _record_from_corners(class_id: int, pts: list[tuple[float, float]],
                         conf: float) -> ObbRecord:
    cx = sum(p[0] for p in pts) / 4.0
    cy = sum(p[1] for p in pts) / 4.0
    e1 = (pts[1][0] - pts[0][0], pts[1][1] - pts[0][1])
    e2 = (pts[2][0] - pts[1][0], pts[2][1] - pts[1][1])
    half_w = math.hypot(*e1) / 2.0
    half_h = math.hypot(*e2) / 2.0
    return ObbRecord(class_id, cx, cy, half_w, half_h,
                     math.atan2(e1[1], e1[0]), conf)


def read_obb_file(path) -> tuple[Georef | None, list[ObbRecord]]:
    """Parse an OBB label file, returning its header georef (if any).

    JSONL lines look like {"cls": 0, "cx": .., "cy": .., "w": .., "h": ..,
    "angle_rad": .., "conf": ..} with w/h full extents in pixels; a line
    {"georef": {"scale": .., "size": ..}} may lead the file. YOLO-OBB rows
    are "cls x1 y1 x2 y2 x3 y3 x4 y4 [conf]" with corners normalized to
    [0,1]; they carry no georef and no confidence by default.
    """
    path = Path(path)
    georef: Georef | None = None
    records: list[ObbRecord] = []
    skipped = 0
    with open(path) as fh:
        lines = fh.readlines()

    yolo_size = None
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("{"):
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{ln}: invalid JSON: {e}") from e
            if "georef" in doc:
                if georef is not None:
                    raise FormatError(
                        f"{path}:{ln}: repeated georef header; "
                        "use one label file per frame")
                try:
                    georef = Georef.from_dict(doc["georef"])
                except (KeyError, TypeError, ValueError) as e:
                    raise FormatError(f"{path}:{ln}: bad georef header: {e}") from e
                continue
            try:
                cls = int(doc["cls"])
                if cls not in _KNOWN_CLASSES:
                    skipped += 1
                    continue
                records.append(ObbRecord(
                    cls, float(doc["cx"]), float(doc["cy"]),
                    float(doc["w"]) / 2.0, float(doc["h"]) / 2.0,
                    float(doc["angle_rad"]), float(doc.get("conf", 1.0))))
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"{path}:{ln}: bad OBB record: {e}") from e
        else:
            toks = line.split()
            if len(toks) not in (9, 10):
                raise FormatError(
                    f"{path}:{ln}: expected 9 or 10 fields in YOLO-OBB row, "
                    f"got {len(toks)}")
            try:
                cls = int(toks[0])
                vals = [float(t) for t in toks[1:9]]
                conf = float(toks[9]) if len(toks) == 10 else 1.0
            except ValueError as e:
                raise FormatError(f"{path}:{ln}: non-numeric field: {e}") from e
            if cls not in _KNOWN_CLASSES:
                skipped += 1
                continue
            if yolo_size is None:
                yolo_size = georef.size if georef is not None else 1.0
            pts = [(vals[2 * i] * yolo_size, vals[2 * i + 1] * yolo_size)
                   for i in range(4)]
            records.append(_record_from_corners(cls, pts, conf))
    if skipped:
        log.warning("%s: skipped %d records with unknown class ids", path, skipped)
    return georef, records


def ingest_obb(path) -> list[ObbRecord]:
    """Records only; see read_obb_file for the georef-aware variant."""
    return read_obb_file(path)[1]


def obb_to_features(records: list[ObbRecord], georef: Georef,
                    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
                    frame_ts: float = 0.0) -> RawDetection:
    """Convert pixel-space boxes to metric wall segments and columns."""
    t0 = time.perf_counter()
    segments = []
    columns = []
    for rec in records:
        if rec.confidence < confidence_floor:
            continue
        if rec.class_id == WALL_CLASS:
            du = math.cos(rec.angle) * rec.half_w
            dv = math.sin(rec.angle) * rec.half_w
            x1, y1 = georef.px_to_world(rec.cx - du, rec.cy - dv)
            x2, y2 = georef.px_to_world(rec.cx + du, rec.cy + dv)
            segments.append(Segment2(Point2(float(x1), float(y1)),
                                     Point2(float(x2), float(y2))))
        else:
            x, y = georef.px_to_world(rec.cx, rec.cy)
            radius = (rec.half_w + rec.half_h) / 2.0 * georef.scale
            columns.append((Point2(float(x), float(y)), radius))
    return RawDetection(segments, columns, "obb", frame_ts,
                        runtime_ms=(time.perf_counter() - t0) * 1e3)


def write_obb_jsonl(path, records: list[ObbRecord], georef: Georef) -> None:
    """Write the JSONL layout with a leading georef header."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"georef": georef.to_dict()}) + "\n")
        for r in records:
            fh.write(json.dumps({
                "cls": r.class_id, "cx": r.cx, "cy": r.cy,
                "w": 2.0 * r.half_w, "h": 2.0 * r.half_h,
                "angle_rad": r.angle, "conf": r.confidence,
            }) + "\n")


def write_obb_yolo(path, records: list[ObbRecord], georef: Georef) -> None:
    """Write the YOLO-OBB normalized corner layout."""
    n = float(georef.size)
    with open(path, "w") as fh:
        for r in records:
            cs = r.corners_px()
            flat = " ".join(f"{c / n:.8f}" for xy in cs for c in xy)
            fh.write(f"{r.class_id} {flat}\n")


def detect_obb(path, georef: Georef | None = None,
               confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
               frame_ts: float = 0.0) -> RawDetection:
    """Read a label file and convert it, using its header georef if present."""
    file_georef, records = read_obb_file(path)
    g = file_georef if file_georef is not None else georef
    if g is None:
        raise FormatError(f"{path}: no georef header and none supplied")
    if file_georef is None and georef is not None:
        # YOLO rows were denormalized against size 1; rescale to pixels.
        records = [ObbRecord(r.class_id, r.cx * g.size, r.cy * g.size,
                             r.half_w * g.size, r.half_h * g.size,
                             r.angle, r.confidence) for r in records]
    return obb_to_features(records, g, confidence_floor, frame_ts)
