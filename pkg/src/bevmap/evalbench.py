"""Map accuracy metrics and pipeline latency benchmarking.

Accuracy follows a length-weighted scheme: a detection only earns credit
for the portion of its extent that projects onto a matched ground-truth
centerline, and overlapping detections never count the same stretch of
ground truth twice. Latency benchmarking replays a frame sequence
through the production pipeline and aggregates per-stage wall-clock
statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bevmap.errors import ConfigError, UndefinedMetricError
from bevmap.geom import (
    PolarSegment,
    Segment2,
    axial_angle_diff,
    point_to_line_distance,
    segment_to_polar,
)
from bevmap.pipeline import LatencyBreakdown, PipelineRun, run_pipeline

__all__ = [
    "MatchCriteria",
    "WallMatch",
    "Correspondence",
    "EvalReport",
    "LatencyBreakdown",
    "BenchResult",
    "match_to_gt",
    "compute_metrics",
    "evaluate",
    "bench_pipeline",
]


@dataclass(frozen=True)
class MatchCriteria:
    """Gates for counting a detection as a hit on a GT centerline."""

    max_perp_dist: float = 0.3
    max_angle: float = math.radians(5.0)

    def __post_init__(self):
        if self.max_perp_dist <= 0.0 or self.max_angle <= 0.0:
            raise ConfigError("match criteria must be positive")


@dataclass(frozen=True)
class WallMatch:
    """One detection's assignment: its nearest eligible GT wall, if any."""

    det_index: int
    det_length: float
    gt_index: int | None
    midpoint_dist: float = 0.0
    angle_diff: float = 0.0
    overlap_len: float = 0.0


@dataclass
class Correspondence:
    """Full matching result; the input to metric computation."""

    matches: list[WallMatch]
    gt_lengths: list[float]
    gt_matched_lengths: list[float]
    gt_intervals: list[list[tuple[float, float]]] = field(default_factory=list)


@dataclass(frozen=True)
class EvalReport:
    recall: float
    precision: float
    f1: float
    dist_err_cm: float
    angle_err_deg: float
    per_wall: list[dict]

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "dist_err_cm": self.dist_err_cm,
            "angle_err_deg": self.angle_err_deg,
            "per_wall": self.per_wall,
        }


def _merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if not intervals:
        return []
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _gt_segments(gt) -> list[Segment2]:
    return list(getattr(gt, "wall_centerlines", gt))


def match_to_gt(detected: list[Segment2], gt,
                criteria: MatchCriteria = MatchCriteria()) -> Correspondence:
    """Assign each detection to its nearest eligible GT centerline.

    Eligibility gates on the detection midpoint's perpendicular distance
    to the GT line and on the axial angle between the two. The credited
    length is the detection's projection onto the GT line clipped to the
    GT extent; per GT wall the credited intervals are unioned so stacked
    detections cannot double-count coverage. gt may be a GroundTruth or
    a plain Segment2 list.
    """
    gt_segs = _gt_segments(gt)
    gt_polar: list[PolarSegment] = [segment_to_polar(s) for s in gt_segs]
    matches: list[WallMatch] = []
    per_gt: list[list[tuple[float, float]]] = [[] for _ in gt_polar]

    for di, det in enumerate(detected):
        det_p = segment_to_polar(det)
        mid = det.midpoint
        best = None
        for gi, gp in enumerate(gt_polar):
            dist = point_to_line_distance(mid, gp)
            ang = axial_angle_diff(det_p.alpha, gp.alpha)
            if dist <= criteria.max_perp_dist and ang <= criteria.max_angle:
                key = (dist, gi)
                if best is None or key < best[0]:
                    best = (key, gi, dist, ang)
        if best is None:
            matches.append(WallMatch(di, det_p.length, None))
            continue
        _key, gi, dist, ang = best
        gp = gt_polar[gi]
        tx, ty = gp.tangent()
        ca = det.p1.x * tx + det.p1.y * ty
        cb = det.p2.x * tx + det.p2.y * ty
        lo, hi = (ca, cb) if ca <= cb else (cb, ca)
        lo, hi = max(lo, gp.d1), min(hi, gp.d2)
        overlap = max(0.0, hi - lo)
        if overlap > 0.0:
            per_gt[gi].append((lo, hi))
        matches.append(WallMatch(di, det_p.length, gi,
                                 midpoint_dist=dist, angle_diff=ang,
                                 overlap_len=overlap))

    merged = [_merge_intervals(iv) for iv in per_gt]
    matched_lengths = [sum(hi - lo for lo, hi in iv) for iv in merged]
    return Correspondence(
        matches=matches,
        gt_lengths=[p.length for p in gt_polar],
        gt_matched_lengths=matched_lengths,
        gt_intervals=merged,
    )


def compute_metrics(corr: Correspondence) -> EvalReport:
    """Length-weighted recall, precision, F1 and geometric errors."""
    total_gt = sum(corr.gt_lengths)
    if total_gt <= 0.0:
        raise UndefinedMetricError("ground truth has zero total length")
    recall = min(1.0, sum(corr.gt_matched_lengths) / total_gt)

    total_det = sum(m.det_length for m in corr.matches)
    credited = sum(m.overlap_len for m in corr.matches)
    precision = min(1.0, credited / total_det) if total_det > 0.0 else 0.0

    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall > 0.0 else 0.0)

    weight = dist_sum = ang_sum = 0.0
    for m in corr.matches:
        if m.gt_index is None or m.overlap_len <= 0.0:
            continue
        weight += m.overlap_len
        dist_sum += m.overlap_len * m.midpoint_dist
        ang_sum += m.overlap_len * m.angle_diff
    dist_err_cm = (dist_sum / weight) * 100.0 if weight > 0.0 else 0.0
    angle_err_deg = math.degrees(ang_sum / weight) if weight > 0.0 else 0.0

    per_wall = [{
        "gt_index": gi,
        "gt_length": corr.gt_lengths[gi],
        "matched_length": corr.gt_matched_lengths[gi],
        "coverage": (corr.gt_matched_lengths[gi] / corr.gt_lengths[gi]
                     if corr.gt_lengths[gi] > 0.0 else 0.0),
    } for gi in range(len(corr.gt_lengths))]

    return EvalReport(recall=recall, precision=precision, f1=f1,
                      dist_err_cm=dist_err_cm, angle_err_deg=angle_err_deg,
                      per_wall=per_wall)


def evaluate(detected: list[Segment2], gt,
             criteria: MatchCriteria = MatchCriteria()) -> EvalReport:
    """Convenience chain: match then compute metrics."""
    return compute_metrics(match_to_gt(detected, gt, criteria))


@dataclass
class BenchResult:
    """Aggregated latency over a replayed sequence.

    samples holds every per-frame breakdown across repetitions; stats
    maps each stage field to mean/p50/p95 milliseconds.
    """

    samples: list[LatencyBreakdown]
    stats: dict
    queue_stats: dict
    frames: int
    repetitions: int

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "repetitions": self.repetitions,
            "stats": self.stats,
            "queue_stats": self.queue_stats,
            "samples": [s.to_dict() for s in self.samples],
        }


_STAGE_FIELDS = ("detector_ms", "local_fusion_ms", "global_fusion_ms",
                 "transfer_ms", "end_to_end_ms")


def _aggregate(samples: list[LatencyBreakdown]) -> dict:
    out = {}
    for name in _STAGE_FIELDS:
        vals = np.array([getattr(s, name) for s in samples], dtype=np.float64)
        out[name] = {
            "mean": float(vals.mean()),
            "p50": float(np.percentile(vals, 50.0)),
            "p95": float(np.percentile(vals, 95.0)),
        }
    return out


def bench_pipeline(sequence, cfg, repetitions: int = 1, *,
                   sequential: bool = False,
                   drops_enabled: bool = False) -> BenchResult:
    """Replay a (frame, pose) sequence and time every stage.

    Drops default to disabled so every frame contributes one sample per
    stage; enable them to observe the production back-pressure behavior
    instead. The map is rebuilt from scratch on each repetition.
    """
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")
    seq = list(sequence)
    samples: list[LatencyBreakdown] = []
    last_run: PipelineRun | None = None
    for _ in range(repetitions):
        last_run = run_pipeline(list(seq), cfg, sequential=sequential,
                                drops_enabled=drops_enabled)
        samples.extend(o.latency for o in last_run.outputs)
    if not samples:
        raise UndefinedMetricError("benchmark produced no samples (empty sequence?)")
    return BenchResult(samples=samples, stats=_aggregate(samples),
                       queue_stats=last_run.queue_stats, frames=len(seq),
                       repetitions=repetitions)
