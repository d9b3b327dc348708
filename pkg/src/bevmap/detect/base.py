"""Shared detector output type and its wire form."""

from __future__ import annotations

from dataclasses import dataclass, field

from bevmap.geom import Point2, Segment2

DETECTOR_IDS = ("ransac", "hough", "lsd", "obb")


@dataclass
class RawDetection:
    """Per-frame detector output.

    segments are wall candidates in metric sensor-frame coordinates.
    columns only appear on the OBB route. rejected holds segments that
    failed the detector's length gate, kept for diagnostics; runtime_ms
    is the detector's own wall-clock cost for the frame.
    """

    segments: list[Segment2]
    columns: list[tuple[Point2, float]]
    detector_id: str
    frame_ts: float
    rejected: list[Segment2] = field(default_factory=list)
    runtime_ms: float = 0.0

    def __post_init__(self):
        if self.detector_id not in DETECTOR_IDS:
            raise ValueError(f"unknown detector_id {self.detector_id!r}")
        for _c, r in self.columns:
            if r <= 0:
                raise ValueError(f"column radius must be > 0, got {r}")

    def to_dict(self) -> dict:
        return {
            "detector_id": self.detector_id,
            "frame_ts": self.frame_ts,
            "segments": [[s.p1.x, s.p1.y, s.p2.x, s.p2.y] for s in self.segments],
            "columns": [[c.x, c.y, r] for c, r in self.columns],
            "rejected": [[s.p1.x, s.p1.y, s.p2.x, s.p2.y] for s in self.rejected],
            "runtime_ms": self.runtime_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RawDetection":
        return cls(
            segments=[Segment2(Point2(a, b), Point2(c, e)) for a, b, c, e in d["segments"]],
            columns=[(Point2(a, b), r) for a, b, r in d["columns"]],
            detector_id=d["detector_id"],
            frame_ts=d["frame_ts"],
            rejected=[Segment2(Point2(a, b), Point2(c, e)) for a, b, c, e in d["rejected"]],
            runtime_ms=d["runtime_ms"],
        )
